"""Label-based validation, run aggregation and sweeps.

Only the pure metrics are re-exported here; ``evaluation.aggregate`` and
``evaluation.sweep`` depend on the training package, which itself imports
the metrics.
"""
from .metrics import ClusteringResult, cluster_sizes, hungarian_accuracy, nmi

__all__ = [
    "ClusteringResult",
    "cluster_sizes",
    "hungarian_accuracy",
    "nmi",
]
