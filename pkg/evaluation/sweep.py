"""Hyperparameter sweeps over lambda, rel_sigma or a fixed sigma.

Every cell starts from the same base seed, so cells differ only in the
swept value. A cell that fails is recorded with its error and the sweep
carries on.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from loguru import logger

from config.experiment import SWEEPABLE_PARAMS, TrainConfig
from core.errors import ConfigError, DTKCError, MissingLabelsError
from data.dataset import Dataset, load_dataset
from evaluation.aggregate import RunSummary, aggregate_runs
from tracking.audit_logger import EventType, get_audit_logger
from training.trainer import train_multi

CSV_COLUMNS = ["param", "value", "status", "mean", "std", "best", "selected", "n_runs", "error"]


@dataclass
class SweepCell:
    param: str
    value: float
    summary: Optional[RunSummary] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.summary is None

    def to_dict(self) -> Dict[str, object]:
        row: Dict[str, object] = {
            "param": self.param,
            "value": self.value,
            "status": "failed" if self.failed else "ok",
            "error": self.error,
        }
        for key in ("mean", "std", "best", "selected", "n_runs"):
            row[key] = getattr(self.summary, key) if self.summary is not None else None
        return row


def check_sweep_values(param: str, values: Sequence[float]) -> List[float]:
    if param not in SWEEPABLE_PARAMS:
        raise ConfigError(f"Parameter '{param}' is not sweepable; choose from {SWEEPABLE_PARAMS}", field="param")
    if not values:
        raise ConfigError("sweep needs at least one value", field="values")
    values = [float(v) for v in values]
    if param == "lambda" and any(v < 0 for v in values):
        raise ConfigError("lambda values must be nonnegative", field="values")
    if param in ("rel_sigma", "sigma") and any(v <= 0 for v in values):
        raise ConfigError(f"{param} values must be positive", field="values")
    return values


def run_sweep(
    cfg: TrainConfig,
    param: str,
    values: Sequence[float],
    dataset: Optional[Dataset] = None,
) -> List[SweepCell]:
    """Run train_multi + aggregate_runs once per value."""
    values = check_sweep_values(param, values)
    if dataset is None:
        if cfg.dataset is None:
            raise ConfigError("no dataset given and the config names none", field="dataset")
        dataset = load_dataset(cfg.dataset)
    if dataset.labels is None:
        raise MissingLabelsError(f"sweep summaries need labels; '{dataset.meta.name}' has none", field="labels")

    audit = get_audit_logger()
    cells: List[SweepCell] = []
    for value in values:
        cell = SweepCell(param=param, value=value)
        cell_id = audit.start_operation(EventType.SWEEP_CELL, f"{param}={value}", parameters={param: value})
        try:
            cell_cfg = cfg.with_override(param, value)
            _, records = train_multi(cell_cfg, dataset)
            cell.summary = aggregate_runs(records, dataset)
        except DTKCError as e:
            cell.error = f"{type(e).__name__}: {e.message}"
            logger.warning(f"Sweep cell {param}={value} failed: {cell.error}")
            audit.fail_operation(cell_id, cell.error)
        else:
            audit.complete_operation(cell_id, result=cell.summary.to_dict())
        cells.append(cell)
    return cells


def write_sweep(cells: Sequence[SweepCell], out_dir: Union[str, Path]) -> Dict[str, Path]:
    """Write ``sweep.csv`` and ``sweep.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [cell.to_dict() for cell in cells]

    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: "" if row[key] is None else row[key] for key in CSV_COLUMNS})

    json_path = out_dir / "sweep.json"
    json_path.write_text(json.dumps({"cells": rows}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Sweep table written to {csv_path} and {json_path}")
    return {"csv": csv_path, "json": json_path}
