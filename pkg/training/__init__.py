"""Training loop, multi-run protocol, run records and checkpoints."""
from .checkpoint import load_checkpoint, load_model, save_checkpoint
from .records import EpochStats, RunRecord, load_run_record, save_run_record
from .trainer import predict, select_best, train_multi, train_one_run

__all__ = [
    "EpochStats",
    "RunRecord",
    "load_checkpoint",
    "load_model",
    "load_run_record",
    "predict",
    "save_checkpoint",
    "save_run_record",
    "select_best",
    "train_multi",
    "train_one_run",
]
