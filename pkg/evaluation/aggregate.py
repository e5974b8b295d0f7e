"""Summaries over the runs of one multi-run experiment."""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from core.errors import AllRunsFailedError, MissingLabelsError
from data.dataset import Dataset
from evaluation.metrics import hungarian_accuracy
from training.records import RunRecord
from training.trainer import model_from_record, predict, select_best


@dataclass
class RunSummary:
    """Accuracy statistics of a multi-run experiment (std is the population std)."""
    mean: float
    std: float
    best: float
    selected: float
    selected_index: int
    n_runs: int
    accuracies: List[float]

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def summarize_accuracies(accuracies: Sequence[float], selected_position: int = 0) -> RunSummary:
    """Mean, population std and best of ``accuracies``; ``selected`` is the entry at ``selected_position``."""
    values = np.asarray(accuracies, dtype=np.float64)
    if values.size == 0:
        raise AllRunsFailedError("no completed runs to summarize")
    return RunSummary(
        mean=float(values.mean()),
        std=float(values.std()),
        best=float(values.max()),
        selected=float(values[selected_position]),
        selected_index=selected_position,
        n_runs=int(values.size),
        accuracies=values.tolist(),
    )


def run_accuracy(record: RunRecord, dataset: Dataset, labels: Optional[np.ndarray] = None) -> float:
    """Hungarian accuracy of a run's final parameters on the full dataset."""
    truth = labels if labels is not None else dataset.labels
    if truth is None:
        raise MissingLabelsError(f"dataset '{dataset.meta.name}' has no labels", field="labels")
    pred, _ = predict(model_from_record(record), dataset)
    return hungarian_accuracy(pred, truth, record.n_clusters)


def aggregate_runs(
    records: Sequence[RunRecord], dataset: Dataset, labels: Optional[np.ndarray] = None
) -> RunSummary:
    """Evaluate every completed run and summarize; ``selected`` is the loss-selected run."""
    completed = [r for r in records if not r.aborted]
    best = select_best(records)
    accuracies = [run_accuracy(r, dataset, labels) for r in completed]
    position = next(i for i, r in enumerate(completed) if r is best)
    summary = summarize_accuracies(accuracies, selected_position=position)
    summary.selected_index = best.run_index
    logger.info(
        f"Accuracy over {summary.n_runs} run(s): mean={summary.mean:.4f} std={summary.std:.4f} "
        f"best={summary.best:.4f} selected={summary.selected:.4f}"
    )
    return summary
