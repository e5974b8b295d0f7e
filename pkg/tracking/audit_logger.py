"""Audit trail of experiment operations (training runs, sweeps, evaluations, exports).

Every state change appends one JSON line to ``audit_<stamp>_<session>.jsonl``
under ``settings.log_dir``. The in-memory view keeps only the latest state of
each entry. Wall-clock data lives here and nowhere else: run records and
checkpoints stay byte-identical across reruns.
"""

import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from config.settings import settings


class EventType(Enum):
    TRAIN_RUN = "train_run"
    MULTI_RUN = "multi_run"
    SWEEP_CELL = "sweep_cell"
    EVALUATION = "evaluation"
    CHECKPOINT = "checkpoint"
    DIAGNOSTIC = "diagnostic"
    DATASET = "dataset"
    ERROR = "error"


class EventStatus(Enum):
    IN_PROGRESS = "in_progress"
    COMPLETED = "completed"
    FAILED = "failed"
    CANCELLED = "cancelled"


@dataclass
class AuditEntry:
    """Latest known state of one experiment operation."""
    id: str
    event_type: str
    description: str
    session_id: str
    status: str = EventStatus.IN_PROGRESS.value
    started_at: str = field(default_factory=lambda: datetime.now().isoformat())
    parent_id: Optional[str] = None
    parameters: Dict[str, Any] = field(default_factory=dict)
    result: Optional[Any] = None
    error_message: Optional[str] = None
    duration_ms: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def finished(self) -> bool:
        return self.status != EventStatus.IN_PROGRESS.value

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class AuditLogger:
    """Append-only JSONL log of the operations of one session."""

    def __init__(self, log_dir: Optional[Path] = None):
        self.session_id = uuid.uuid4().hex
        self.log_dir = Path(log_dir or settings.log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_file = self.log_dir / f"audit_{stamp}_{self.session_id[:8]}.jsonl"

        self._entries: Dict[str, AuditEntry] = {}
        self._clock: Dict[str, float] = {}
        self._lock = threading.Lock()

        logger.debug(f"Audit trail for session {self.session_id} at {self.log_file}")

    @property
    def entries(self) -> List[AuditEntry]:
        with self._lock:
            return list(self._entries.values())

    def _record(self, entry: AuditEntry) -> None:
        line = json.dumps(entry.to_dict(), default=str, sort_keys=True)
        with self._lock:
            self._entries[entry.id] = entry
            try:
                with open(self.log_file, "a", encoding="utf-8") as f:
                    f.write(line + "\n")
            except OSError as e:
                logger.error(f"Could not append to audit trail {self.log_file}: {e}")

    def start_operation(
        self,
        event_type: EventType,
        description: str,
        parameters: Optional[Dict[str, Any]] = None,
        parent_id: Optional[str] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> str:
        """Open an operation and return its id; close it with complete/fail/cancel."""
        entry = AuditEntry(
            id=uuid.uuid4().hex,
            event_type=event_type.value,
            description=description,
            session_id=self.session_id,
            parent_id=parent_id,
            parameters=dict(parameters or {}),
            metadata=dict(metadata or {}),
        )
        self._clock[entry.id] = time.monotonic()
        self._record(entry)
        logger.debug(f"{event_type.value} started: {description}")
        return entry.id

    def _close(self, operation_id: str, status: EventStatus, **changes: Any) -> Optional[AuditEntry]:
        started = self._clock.pop(operation_id, None)
        entry = self._entries.get(operation_id)
        if started is None or entry is None:
            logger.warning(f"Audit operation {operation_id} is not open")
            return None

        extra = changes.pop("metadata", None) or {}
        updated = AuditEntry(**{**entry.to_dict(), **changes})
        updated.status = status.value
        updated.metadata = {**entry.metadata, **extra}
        updated.duration_ms = round((time.monotonic() - started) * 1000.0, 3)
        self._record(updated)
        return updated

    def complete_operation(
        self, operation_id: str, result: Any = None, metadata: Optional[Dict[str, Any]] = None
    ) -> None:
        entry = self._close(operation_id, EventStatus.COMPLETED, result=result, metadata=metadata)
        if entry:
            logger.debug(f"{entry.event_type} done in {entry.duration_ms:.0f} ms: {entry.description}")

    def fail_operation(
        self, operation_id: str, error_message: str, metadata: Optional[Dict[str, Any]] = None
    ) -> None:
        entry = self._close(operation_id, EventStatus.FAILED, error_message=error_message, metadata=metadata)
        if entry:
            logger.warning(f"{entry.event_type} failed: {entry.description}: {error_message}")

    def cancel_operation(self, operation_id: str, reason: str) -> None:
        self._close(operation_id, EventStatus.CANCELLED, error_message=reason)

    def log_event(
        self, event_type: EventType, description: str, metadata: Optional[Dict[str, Any]] = None
    ) -> str:
        """Record an instantaneous, already finished event."""
        entry = AuditEntry(
            id=uuid.uuid4().hex,
            event_type=event_type.value,
            description=description,
            session_id=self.session_id,
            status=EventStatus.COMPLETED.value,
            duration_ms=0.0,
            metadata=dict(metadata or {}),
        )
        self._record(entry)
        return entry.id

    def get_session_summary(self) -> Dict[str, Any]:
        entries = self.entries
        finished = [e for e in entries if e.finished]
        by_status = {s.value: sum(1 for e in finished if e.status == s.value) for s in EventStatus}
        return {
            "session_id": self.session_id,
            "total_operations": len(finished),
            "completed": by_status[EventStatus.COMPLETED.value],
            "failed": by_status[EventStatus.FAILED.value],
            "cancelled": by_status[EventStatus.CANCELLED.value],
            "in_progress": len(entries) - len(finished),
            "log_file": str(self.log_file),
        }

    def export_session(self, output_path: Optional[Path] = None) -> Path:
        """Write the session's latest entry states and summary as one JSON document."""
        path = Path(output_path or self.log_dir / f"session_{self.session_id}.json")
        data = {
            "session_id": self.session_id,
            "exported_at": datetime.now().isoformat(),
            "summary": self.get_session_summary(),
            "entries": [e.to_dict() for e in self.entries],
        }
        path.write_text(json.dumps(data, indent=2, default=str), encoding="utf-8")
        logger.info(f"Audit session exported to {path}")
        return path


_audit_logger: Optional[AuditLogger] = None


def get_audit_logger() -> AuditLogger:
    """Process-wide audit trail, created on first use."""
    global _audit_logger
    if _audit_logger is None:
        _audit_logger = AuditLogger()
    return _audit_logger
