"""Cauchy-Schwarz divergence clustering loss (separation, orthogonality, simplex corners)."""

import threading
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import torch
from loguru import logger
from torch import Tensor

from core.errors import DimensionMismatchError, TooFewRowsError
from core.kernels import KernelMatrix

EPSILON = 1e-9


class EmptyClusterCounter:
    """Process-wide count of CS ratios evaluated with an (almost) empty column."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> None:
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        with self._lock:
            return self._count

    def reset(self) -> int:
        with self._lock:
            value, self._count = self._count, 0
            return value


_empty_cluster_counter: Optional[EmptyClusterCounter] = None


def get_empty_cluster_counter() -> EmptyClusterCounter:
    """Get or create the global empty-cluster counter."""
    global _empty_cluster_counter
    if _empty_cluster_counter is None:
        _empty_cluster_counter = EmptyClusterCounter()
    return _empty_cluster_counter


@dataclass
class LossBreakdown:
    """Per-term loss values; ``total`` is the weighted sum of the terms."""
    l1_separation: Tensor
    l2_orthogonality: Tensor
    l3_corner: Tensor
    total: Tensor
    simplex_similarity: Optional[Tensor] = None
    empty_columns: int = 0

    def as_floats(self) -> Dict[str, float]:
        return {
            "l1": float(self.l1_separation.detach().item()),
            "l2": float(self.l2_orthogonality.detach().item()),
            "l3": float(self.l3_corner.detach().item()),
            "total": float(self.total.detach().item()),
        }


@dataclass
class CSRatio:
    value: Tensor
    empty_columns: int = 0


def check_assignments(a: Tensor) -> Tensor:
    if a.dim() != 2:
        raise DimensionMismatchError(f"assignment matrix must be n x k, got shape {tuple(a.shape)}", field="A")
    return a


def cs_pairwise_ratio(c: Tensor, k: KernelMatrix) -> CSRatio:
    """Mean over column pairs i<j of c_i^T K c_j / sqrt(c_i^T K c_i * c_j^T K c_j + eps^2)."""
    kernel = k.entries
    if c.dim() != 2 or kernel.shape != (c.shape[0], c.shape[0]):
        raise DimensionMismatchError(
            f"columns {tuple(c.shape)} do not match kernel {tuple(kernel.shape)}", field="K"
        )
    p = c.shape[1]
    if p < 2:
        raise DimensionMismatchError(f"need at least 2 columns, got {p}", field="C")

    nom = c.T @ kernel @ c
    diag = torch.diagonal(nom)
    dnom = torch.sqrt(diag.unsqueeze(1) * diag.unsqueeze(0) + EPSILON ** 2)

    iu = torch.triu_indices(p, p, offset=1, device=c.device)
    value = (nom / dnom)[iu[0], iu[1]].sum() * (2.0 / (p * (p - 1)))

    empty = int((diag.detach() < EPSILON).sum().item())
    if empty:
        get_empty_cluster_counter().add(empty)
        logger.debug(f"{empty} empty column(s) in CS ratio; evaluated with eps guard")
    return CSRatio(value=value, empty_columns=empty)


def l1_cluster_separation(a: Tensor, k: KernelMatrix) -> CSRatio:
    """Between-cluster similarity of the assignment columns under K."""
    return cs_pairwise_ratio(check_assignments(a), k)


def l2_orthogonality(a: Tensor) -> Tensor:
    """Normalized strictly-upper-triangular sum of A A^T."""
    a = check_assignments(a)
    n = a.shape[0]
    if n < 2:
        raise TooFewRowsError(f"need at least 2 observations, got {n}", field="A")
    gram = a @ a.T
    return torch.triu(gram, diagonal=1).sum() * (2.0 / (n * (n - 1)))


def simplex_similarity(a: Tensor) -> Tensor:
    """m_qi = exp(-||alpha_q - e_i||^2)."""
    a = check_assignments(a)
    sq_norms = (a * a).sum(dim=1, keepdim=True)
    return torch.exp(-(sq_norms - 2.0 * a + 1.0).clamp_min(0.0))


def l3_corner(a: Tensor, k: KernelMatrix) -> CSRatio:
    """CS ratio of the simplex-similarity columns: pushes rows towards the corners."""
    return cs_pairwise_ratio(simplex_similarity(a), k)


def ddc_loss(a: Tensor, k: KernelMatrix, weights: Sequence[float] = (1.0, 1.0, 1.0)) -> LossBreakdown:
    """Three-term DDC loss on assignment matrix ``a`` and kernel ``k``."""
    a = check_assignments(a)
    if k.n != a.shape[0]:
        raise DimensionMismatchError(f"kernel n={k.n} but A has {a.shape[0]} rows", field="K")

    m = simplex_similarity(a)
    l1 = l1_cluster_separation(a, k)
    l2 = l2_orthogonality(a)
    l3 = cs_pairwise_ratio(m, k)
    total = weights[0] * l1.value + weights[1] * l2 + weights[2] * l3.value
    return LossBreakdown(
        l1_separation=l1.value,
        l2_orthogonality=l2,
        l3_corner=l3.value,
        total=total,
        simplex_similarity=m,
        empty_columns=l1.empty_columns + l3.empty_columns,
    )
