"""Kernel matrices K^l: Gaussian kernels on vectors, tensor kernels on rank-3 feature maps."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import torch
from torch import Tensor

from config.experiment import KernelConfig
from core.errors import (
    DimensionMismatchError,
    NonPositiveSigmaError,
    ShapeMismatchError,
    TooFewRowsError,
    WrongRankError,
)
from core.tensor_ops import (
    OrthonormalBasis,
    batch_subspace_projectors,
    check_dense,
    default_subspace_rank,
    median_pairwise_distance,
    pairwise_sq_distances,
    unfold_batch,
)


class KernelKind(Enum):
    """Which construction produced a kernel matrix."""
    GAUSSIAN_VECTOR = "gaussian_vector"
    TENSOR = "tensor"


@dataclass
class KernelMatrix:
    """n x n similarity matrix together with the bandwidth that built it."""
    entries: Tensor
    sigma: float
    kind: KernelKind

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])


def bandwidth_from_batch(rows: Tensor, cfg: KernelConfig) -> float:
    """sigma = max(rel_sigma * median pairwise distance, min_sigma).

    The result is a plain float: sigma is a constant with respect to gradients.
    """
    if rows.dim() != 2:
        rows = rows.reshape(rows.shape[0], -1)
    if rows.shape[0] < 2:
        raise TooFewRowsError(f"bandwidth needs at least 2 rows, got {rows.shape[0]}", field="rows")
    return max(cfg.rel_sigma * median_pairwise_distance(rows.detach()), cfg.min_sigma)


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise NonPositiveSigmaError(f"sigma must be positive, got {sigma}", field="sigma")


def gaussian_from_sq_distances(sq_distances: Tensor, sigma: float) -> Tensor:
    _check_sigma(sigma)
    return torch.exp(-sq_distances / (2.0 * sigma ** 2))


def gaussian_kernel_matrix(rows: Tensor, sigma: float) -> KernelMatrix:
    """kappa_ij = exp(-||h_i - h_j||^2 / (2 sigma^2))."""
    _check_sigma(sigma)
    if rows.dim() != 2:
        raise WrongRankError(f"expected an (n, d) matrix, got rank {rows.dim()}", field="rows")
    entries = gaussian_from_sq_distances(pairwise_sq_distances(rows), sigma)
    return KernelMatrix(entries=entries, sigma=float(sigma), kind=KernelKind.GAUSSIAN_VECTOR)


def chordal_sq_distance(a: OrthonormalBasis, b: OrthonormalBasis) -> Tensor:
    """d^2 = 1/2 ||U_a U_a^T - U_b U_b^T||_F^2, in [0, r]."""
    if a.ambient_dim != b.ambient_dim or a.rank != b.rank:
        raise DimensionMismatchError(
            f"bases differ: ({a.ambient_dim}, r={a.rank}) vs ({b.ambient_dim}, r={b.rank})"
        )
    diff = a.projection() - b.projection()
    return torch.clamp(0.5 * (diff * diff).sum(), min=0.0)


def _mode_sq_distances(unfoldings: Tensor, rank: int, method: str) -> Tensor:
    """Pairwise chordal distances between the subspaces of a stack of unfoldings."""
    if method == "gram":
        gram = unfoldings @ unfoldings.transpose(-1, -2)
        gram = gram / torch.linalg.matrix_norm(gram).clamp_min(torch.finfo(gram.dtype).tiny)[:, None, None]
        flat = gram.reshape(gram.shape[0], -1)
        return 0.5 * pairwise_sq_distances(flat)

    projectors = batch_subspace_projectors(unfoldings, rank)
    # 1/2 ||P_i - P_j||_F^2
    return 0.5 * pairwise_sq_distances(projectors.reshape(projectors.shape[0], -1))


def tensor_sq_distances(batch: Tensor, cfg: KernelConfig) -> Tensor:
    """Sum over the three modes of pairwise chordal distances; size-1 modes contribute 0."""
    if batch.dim() != 4:
        raise ShapeMismatchError(
            f"tensor kernel expects n tensors of a common rank-3 shape, got {tuple(batch.shape)}",
            field="batch",
        )
    check_dense(batch.detach().reshape(batch.shape[0], -1), name="batch")

    n = batch.shape[0]
    total = torch.zeros(n, n, dtype=batch.dtype, device=batch.device)
    for mode in (1, 2, 3):
        if batch.shape[mode] == 1:
            continue
        unfoldings = unfold_batch(batch, mode)
        rank = default_subspace_rank(unfoldings.shape[1], unfoldings.shape[2], cfg.subspace_rank)
        total = total + _mode_sq_distances(unfoldings, rank, cfg.subspace_method)
    return total


def tensor_kernel_matrix(batch: Tensor, sigma: float, cfg: KernelConfig) -> KernelMatrix:
    """kappa_ij = prod_m exp(-d_m^2(S_i^m, S_j^m) / (2 sigma^2)) over the mode subspaces."""
    _check_sigma(sigma)
    entries = gaussian_from_sq_distances(tensor_sq_distances(batch, cfg), sigma)
    return KernelMatrix(entries=entries, sigma=float(sigma), kind=KernelKind.TENSOR)


def tensor_bandwidth(batch: Tensor, cfg: KernelConfig, sq_distances: Optional[Tensor] = None) -> float:
    """Bandwidth for a batch of feature maps according to ``cfg.tensor_sigma_source``.

    "flattened" applies the median rule to the raw maps; "subspace" applies it
    to the square roots of the summed chordal distances.
    """
    if cfg.fixed_sigma is not None:
        return cfg.fixed_sigma
    if cfg.tensor_sigma_source == "flattened":
        return bandwidth_from_batch(batch.reshape(batch.shape[0], -1), cfg)

    n = batch.shape[0]
    if n < 2:
        raise TooFewRowsError(f"bandwidth needs at least 2 rows, got {n}", field="batch")
    if sq_distances is None:
        with torch.no_grad():
            sq_distances = tensor_sq_distances(batch.detach(), cfg)
    iu = torch.triu_indices(n, n, offset=1)
    distances = torch.sqrt(sq_distances.detach()[iu[0], iu[1]].double())
    median = float(torch.quantile(distances, 0.5).item())
    return max(cfg.rel_sigma * median, cfg.min_sigma)


def feature_map_kernel(batch: Tensor, cfg: KernelConfig) -> KernelMatrix:
    """Tensor kernel with its bandwidth chosen from the same batch."""
    if cfg.tensor_sigma_source == "subspace" and cfg.fixed_sigma is None:
        sq = tensor_sq_distances(batch, cfg)
        sigma = tensor_bandwidth(batch, cfg, sq_distances=sq)
        return KernelMatrix(entries=gaussian_from_sq_distances(sq, sigma), sigma=sigma, kind=KernelKind.TENSOR)
    return tensor_kernel_matrix(batch, tensor_bandwidth(batch, cfg), cfg)


def vector_bandwidth(rows: Tensor, cfg: KernelConfig) -> float:
    if cfg.fixed_sigma is not None:
        return cfg.fixed_sigma
    return bandwidth_from_batch(rows, cfg)
