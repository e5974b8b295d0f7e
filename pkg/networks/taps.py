"""Per-layer taps and the padded sequence batch."""

from dataclasses import dataclass
from enum import Enum

import torch
from torch import Tensor

from core.errors import EmptySequenceError, ShapeMismatchError


class TapKind(Enum):
    """What a layer tap holds."""
    CONV_MAP = "conv_map"                   # n rank-3 feature maps
    LAST_HIDDEN_STATE = "last_hidden_state"  # n vectors


@dataclass
class LayerTap:
    """Output of layer ``layer_index`` (1-based) for every observation in the batch."""
    layer_index: int
    kind: TapKind
    batch: Tensor

    @property
    def n(self) -> int:
        return int(self.batch.shape[0])


@dataclass
class SequenceBatch:
    """n zero-padded sequences of shape (n, max_length, dim) with their true lengths."""
    values: Tensor
    lengths: Tensor

    def __post_init__(self):
        if self.values.dim() != 3:
            raise ShapeMismatchError(
                f"sequence values must be (n, max_length, dim), got {tuple(self.values.shape)}",
                field="values",
            )
        self.lengths = torch.as_tensor(self.lengths, dtype=torch.int64).reshape(-1)
        if self.lengths.shape[0] != self.values.shape[0]:
            raise ShapeMismatchError(
                f"{self.lengths.shape[0]} lengths for {self.values.shape[0]} sequences", field="lengths"
            )
        if (self.lengths < 1).any():
            bad = torch.nonzero(self.lengths < 1).flatten().tolist()
            raise EmptySequenceError(f"sequences {bad} have length 0", field="lengths")
        if (self.lengths > self.values.shape[1]).any():
            raise ShapeMismatchError("a length exceeds the padded sequence length", field="lengths")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[2])

    @property
    def max_length(self) -> int:
        return int(self.values.shape[1])

    def padding_mask(self) -> Tensor:
        """True at padding positions."""
        steps = torch.arange(self.max_length).unsqueeze(0)
        return steps >= self.lengths.unsqueeze(1)

    def padding_is_zero(self) -> bool:
        return bool((self.values[self.padding_mask()] == 0).all())

    def subset(self, index: Tensor) -> "SequenceBatch":
        return SequenceBatch(self.values[index], self.lengths[index])
