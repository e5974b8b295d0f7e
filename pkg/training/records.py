"""Per-run training records.

A RunRecord serializes without any wall-clock data, so two runs with the same
seed produce byte-identical ``record.json`` files. Durations go to the audit
trail instead.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from config.experiment import ArchitectureSpec
from core.companion import ObjectiveBreakdown
from networks.model import ModelParams


@dataclass
class EpochStats:
    """Losses on the fixed evaluation batch after one epoch."""
    epoch: int
    total_loss: float
    main: Dict[str, float]
    companions: Dict[str, float] = field(default_factory=dict)
    empty_columns: int = 0
    accuracy: Optional[float] = None
    nmi: Optional[float] = None

    @classmethod
    def from_breakdown(cls, epoch: int, breakdown: ObjectiveBreakdown) -> "EpochStats":
        floats = breakdown.as_floats()
        empty = breakdown.main.empty_columns + sum(c.empty_columns for c in breakdown.companions.values())
        return cls(
            epoch=epoch,
            total_loss=floats["total"],
            main=floats["main"],
            companions=floats["companions"],
            empty_columns=empty,
        )


@dataclass
class RunRecord:
    """One training run: seed, loss history, final loss and (in memory) the final parameters."""
    run_index: int
    seed: int
    final_loss: float = float("inf")
    history: List[EpochStats] = field(default_factory=list)
    aborted_step: Optional[int] = None
    error: Optional[str] = None
    checkpoint: Optional[str] = None

    # In-memory only
    params: Optional[ModelParams] = field(default=None, repr=False, compare=False)
    architecture: Optional[ArchitectureSpec] = field(default=None, repr=False, compare=False)
    input_shape: Optional[Tuple[int, ...]] = field(default=None, repr=False, compare=False)
    n_clusters: Optional[int] = field(default=None, repr=False, compare=False)
    wall_clock_s: Optional[float] = field(default=None, repr=False, compare=False)

    @property
    def aborted(self) -> bool:
        return self.aborted_step is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_index": self.run_index,
            "seed": self.seed,
            "final_loss": self.final_loss,
            "aborted_step": self.aborted_step,
            "error": self.error,
            "checkpoint": self.checkpoint,
            "history": [asdict(h) for h in self.history],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        return cls(
            run_index=int(data["run_index"]),
            seed=int(data["seed"]),
            final_loss=float(data["final_loss"]),
            history=[EpochStats(**h) for h in data.get("history", [])],
            aborted_step=data.get("aborted_step"),
            error=data.get("error"),
            checkpoint=data.get("checkpoint"),
        )


def save_run_record(record: RunRecord, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_run_record(path: Union[str, Path]) -> RunRecord:
    return RunRecord.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
