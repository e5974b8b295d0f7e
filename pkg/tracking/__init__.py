"""Experiment audit trail."""
from .audit_logger import AuditLogger, EventType, get_audit_logger

__all__ = [
    "AuditLogger",
    "EventType",
    "get_audit_logger",
]
