"""External clustering metrics. Labels are only ever used here, after training."""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import normalized_mutual_info_score

from core.errors import LabelOutOfRangeError, LengthMismatchError


def check_labels(pred: Sequence[int], truth: Sequence[int], k: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatchError(f"{pred.size} predictions for {truth.size} labels")
    if pred.size and (pred.min() < 0 or truth.min() < 0):
        raise LabelOutOfRangeError("labels must be nonnegative")
    if k is not None and pred.size and (pred.max() >= k or truth.max() >= k):
        raise LabelOutOfRangeError(f"labels outside [0, {k})")
    return pred, truth


def confusion_matrix(pred: np.ndarray, truth: np.ndarray, size: int) -> np.ndarray:
    """counts[c, t] = number of observations in predicted cluster c with true class t."""
    counts = np.zeros((size, size), dtype=np.int64)
    np.add.at(counts, (pred, truth), 1)
    return counts


def hungarian_accuracy(pred: Sequence[int], truth: Sequence[int], k: Optional[int] = None) -> float:
    """Fraction of observations matched under the best one-to-one cluster-to-class map."""
    pred, truth = check_labels(pred, truth, k)
    if pred.size == 0:
        raise LengthMismatchError("no observations to score")
    # Square matrix: unequal predicted/true class counts get zero-padded.
    size = max(k or 0, int(pred.max()) + 1, int(truth.max()) + 1)
    counts = confusion_matrix(pred, truth, size)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return float(counts[rows, cols].sum()) / pred.size


def nmi(pred: Sequence[int], truth: Sequence[int]) -> float:
    """Mutual information over the arithmetic mean of the entropies; 0 when either labeling is constant."""
    pred, truth = check_labels(pred, truth)
    if np.unique(pred).size < 2 or np.unique(truth).size < 2:
        return 0.0
    return float(normalized_mutual_info_score(truth, pred, average_method="arithmetic"))


def cluster_sizes(pred: Sequence[int], k: int) -> List[int]:
    return np.bincount(np.asarray(pred, dtype=np.int64), minlength=k).tolist()


@dataclass
class ClusteringResult:
    predictions: np.ndarray
    k: int
    truth: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.predictions.size and (self.predictions.min() < 0 or self.predictions.max() >= self.k):
            raise LabelOutOfRangeError(f"predictions outside [0, {self.k})")

    def to_dict(self) -> Dict[str, object]:
        report: Dict[str, object] = {
            "n": int(self.predictions.size),
            "k": self.k,
            "cluster_sizes": cluster_sizes(self.predictions, self.k),
        }
        if self.truth is not None:
            report["accuracy"] = hungarian_accuracy(self.predictions, self.truth, self.k)
            report["nmi"] = nmi(self.predictions, self.truth)
        return report
