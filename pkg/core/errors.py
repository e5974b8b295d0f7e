"""Error hierarchy shared by every DTKC module."""

from typing import Any, Dict, List, Optional


class DTKCError(Exception):
    """Base error with details."""
    code = "dtkc_error"

    def __init__(self, message: str, field: Optional[str] = None, code: Optional[str] = None):
        self.message = message
        self.field = field
        if code is not None:
            self.code = code
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "code": self.code, "message": self.message, "field": self.field}


# Tensor algebra / kernels

class WrongRankError(DTKCError):
    code = "wrong_rank"


class NonFiniteInputError(DTKCError):
    code = "non_finite_input"


class DegenerateInputError(DTKCError):
    code = "degenerate_input"


class RankTooLargeError(DTKCError):
    code = "rank_too_large"


class TooFewRowsError(DTKCError):
    code = "too_few_rows"


class NonPositiveSigmaError(DTKCError):
    code = "non_positive_sigma"


class DimensionMismatchError(DTKCError):
    code = "dimension_mismatch"


class ShapeMismatchError(DTKCError):
    code = "shape_mismatch"


# Networks / training

class EmptySequenceError(DTKCError):
    code = "empty_sequence"


class NonFiniteLossError(DTKCError):
    """Raised when a training step produces a NaN/Inf loss."""
    code = "non_finite_loss"

    def __init__(self, message: str, step: int, epoch: int, history: Optional[List[Any]] = None):
        super().__init__(message)
        self.step = step
        self.epoch = epoch
        self.history = history or []


class AllRunsFailedError(DTKCError):
    code = "all_runs_failed"


class CorruptCheckpointError(DTKCError):
    code = "corrupt_checkpoint"


# Evaluation / diagnostics

class LengthMismatchError(DTKCError):
    code = "length_mismatch"


class LabelOutOfRangeError(DTKCError):
    code = "label_out_of_range"


class LayerWithoutCompanionError(DTKCError):
    code = "layer_without_companion"


class ConstantSeriesError(DTKCError):
    code = "constant_series"


class NotAnImageDatasetError(DTKCError):
    code = "not_an_image_dataset"


# Data / configuration

class CorruptDatasetError(DTKCError):
    code = "corrupt_dataset"


class ConfigError(DTKCError):
    code = "config_error"


class MissingLabelsError(DTKCError):
    """Raised when an evaluation-only operation gets a dataset or record without labels."""
    code = "missing_labels"
