"""Unsupervised companion objectives on every tap, and the full training objective."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import torch
from pydantic import BaseModel, ConfigDict, Field
from torch import Tensor

from config.experiment import KernelConfig, TrainConfig
from core.errors import DimensionMismatchError, TooFewRowsError
from core.kernels import KernelMatrix, feature_map_kernel, gaussian_kernel_matrix, vector_bandwidth
from core.objective import LossBreakdown, cs_pairwise_ratio, ddc_loss, simplex_similarity
from networks.taps import LayerTap, TapKind


class CompanionWeights(BaseModel):
    """lambda and the per-tap enable flags (None = all taps enabled)."""

    model_config = ConfigDict(extra="forbid")

    lam: float = Field(0.0, ge=0)
    per_layer_enabled: Optional[List[bool]] = None

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "CompanionWeights":
        return cls(lam=cfg.companion_lambda, per_layer_enabled=cfg.companion_layers)

    def enabled(self, position: int) -> bool:
        if self.per_layer_enabled is None:
            return True
        if position >= len(self.per_layer_enabled):
            return False
        return bool(self.per_layer_enabled[position])


@dataclass
class ObjectiveBreakdown:
    """Main DDC loss, per-layer companion losses (keyed by layer index) and the lambda-weighted total."""
    main: LossBreakdown
    companions: Dict[int, LossBreakdown] = field(default_factory=dict)
    total: Optional[Tensor] = None
    lam: float = 0.0

    def as_floats(self) -> Dict[str, object]:
        return {
            "total": float(self.total.detach().item()),
            "main": self.main.as_floats(),
            "companions": {str(l): c.as_floats()["total"] for l, c in sorted(self.companions.items())},
        }


def companion_kernel(tap: LayerTap, cfg: KernelConfig) -> KernelMatrix:
    """Tensor kernel for conv taps, Gaussian kernel for vector taps."""
    if tap.n < 2:
        raise TooFewRowsError(f"companion kernel needs at least 2 observations, got {tap.n}", field="tap")

    if tap.kind is TapKind.CONV_MAP:
        return feature_map_kernel(tap.batch, cfg)

    rows = tap.batch.reshape(tap.n, -1)
    return gaussian_kernel_matrix(rows, vector_bandwidth(rows, cfg))


def companion_loss(tap: LayerTap, a: Tensor, cfg: KernelConfig) -> LossBreakdown:
    """Kernel-dependent DDC terms (l1, l3) on the tap's kernel with the head's assignments."""
    kernel = companion_kernel(tap, cfg)
    if kernel.n != a.shape[0]:
        raise DimensionMismatchError(f"tap has {kernel.n} observations but A has {a.shape[0]} rows")

    m = simplex_similarity(a)
    l1 = cs_pairwise_ratio(a, kernel)
    l3 = cs_pairwise_ratio(m, kernel)
    zero = torch.zeros((), dtype=a.dtype, device=a.device)
    return LossBreakdown(
        l1_separation=l1.value,
        l2_orthogonality=zero,
        l3_corner=l3.value,
        total=l1.value + l3.value,
        simplex_similarity=m,
        empty_columns=l1.empty_columns + l3.empty_columns,
    )


def main_kernel(hidden: Tensor, cfg: KernelConfig) -> KernelMatrix:
    rows = hidden.reshape(hidden.shape[0], -1)
    return gaussian_kernel_matrix(rows, vector_bandwidth(rows, cfg))


def total_objective(
    taps: Sequence[LayerTap],
    hidden: Tensor,
    a: Tensor,
    weights: CompanionWeights,
    cfg: KernelConfig,
    term_weights: Sequence[float] = (1.0, 1.0, 1.0),
) -> ObjectiveBreakdown:
    """ddc_loss(A, K_hidden) + lambda * sum of enabled companion losses.

    With lambda == 0 no companion kernel is built, so the result is exactly
    the plain DDC loss.
    """
    if hidden is None:
        raise DimensionMismatchError("the final hidden representation is required", field="hidden")

    main = ddc_loss(a, main_kernel(hidden, cfg), weights=term_weights)
    result = ObjectiveBreakdown(main=main, total=main.total, lam=weights.lam)
    if weights.lam == 0:
        return result

    companion_sum = None
    for position, tap in enumerate(taps):
        if not weights.enabled(position):
            continue
        loss = companion_loss(tap, a, cfg)
        result.companions[tap.layer_index] = loss
        companion_sum = loss.total if companion_sum is None else companion_sum + loss.total

    if companion_sum is not None:
        result.total = main.total + weights.lam * companion_sum
    return result
