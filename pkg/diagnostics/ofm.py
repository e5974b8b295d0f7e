"""Objective function mismatch: how well the loss tracks accuracy over training.

A correlation near -1 between the per-epoch loss and the per-epoch accuracy
means that lowering the loss reliably raised the accuracy. Values near 0 or
above 0 indicate mismatch.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.stats import pearsonr

from core.errors import ConstantSeriesError, LengthMismatchError, MissingLabelsError
from training.records import RunRecord


def loss_accuracy_correlation(losses: Sequence[float], accuracies: Sequence[float]) -> float:
    """Pearson correlation across epochs; ConstantSeriesError when either series has zero variance."""
    x = np.asarray(losses, dtype=np.float64)
    y = np.asarray(accuracies, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatchError(f"{x.size} losses for {y.size} accuracies")
    if x.size < 2:
        raise ConstantSeriesError(f"need at least 2 epochs, got {x.size}")
    if np.ptp(x) == 0:
        raise ConstantSeriesError("loss is constant across epochs; correlation undefined", field="loss")
    if np.ptp(y) == 0:
        raise ConstantSeriesError("accuracy is constant across epochs; correlation undefined", field="accuracy")
    return float(pearsonr(x, y)[0])


@dataclass
class OFMReport:
    run_index: int
    pairs: List[Tuple[int, float, float]]
    correlation: float
    main_correlation: Optional[float] = None
    main_pairs: List[Tuple[int, float, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["pairs"] = [{"epoch": e, "loss": l, "accuracy": a} for e, l, a in self.pairs]
        data["main_pairs"] = [{"epoch": e, "loss": l, "accuracy": a} for e, l, a in self.main_pairs]
        return data


def ofm_curves(record: RunRecord) -> OFMReport:
    """Per-epoch (loss, accuracy) pairs and their correlation, for the total and the main loss."""
    if not record.history or any(h.accuracy is None for h in record.history):
        raise MissingLabelsError(
            f"run {record.run_index} has no per-epoch accuracy; train with evaluation labels", field="accuracy"
        )

    epochs = [h.epoch for h in record.history]
    accuracies = [h.accuracy for h in record.history]
    totals = [h.total_loss for h in record.history]
    mains = [h.main["total"] for h in record.history]

    report = OFMReport(
        run_index=record.run_index,
        pairs=list(zip(epochs, totals, accuracies)),
        correlation=loss_accuracy_correlation(totals, accuracies),
        main_pairs=list(zip(epochs, mains, accuracies)),
    )
    try:
        report.main_correlation = loss_accuracy_correlation(mains, accuracies)
    except ConstantSeriesError as e:
        logger.warning(f"Main-loss correlation undefined: {e.message}")

    logger.info(f"OFM for run {record.run_index}: correlation={report.correlation:.4f}")
    return report


def write_ofm_report(report: OFMReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
