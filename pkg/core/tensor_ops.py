"""Deterministic tensor algebra used by every kernel.

Unfolding convention (modes are 1-based, indices 0-based): the mode-m
unfolding of a rank-3 tensor of shape (I1, I2, I3) is an I_m x (I_a * I_b)
matrix with (a, b) the two remaining modes in ascending order, and entry
(i_m, i_a + i_b * I_a). In a row-major layout this is
``t.permute(m, b, a).reshape(I_m, -1)``.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import torch
from torch import Tensor

from core.errors import (
    DegenerateInputError,
    NonFiniteInputError,
    RankTooLargeError,
    TooFewRowsError,
    WrongRankError,
)

# Frobenius norms below this are treated as zero.
DEGENERATE_TOL = 1e-12
# Relative eigenvalue gap below which a subspace direction gets no gradient.
EIGEN_GAP_TOL = 1e-10


def check_dense(t: Tensor, name: str = "tensor") -> Tensor:
    """Validate the DenseTensor contract: rank 1-4, all values finite."""
    if not 1 <= t.dim() <= 4:
        raise WrongRankError(f"{name} must have rank 1-4, got rank {t.dim()}", field=name)
    if not torch.isfinite(t).all():
        raise NonFiniteInputError(f"{name} contains NaN or Inf values", field=name)
    return t


def _other_modes(mode: int) -> Tuple[int, int]:
    a, b = [m for m in (1, 2, 3) if m != mode]
    return a, b


def _check_mode(mode: int) -> None:
    if mode not in (1, 2, 3):
        raise WrongRankError(f"mode must be 1, 2 or 3, got {mode}", field="mode")


def unfold(t: Tensor, mode: int) -> Tensor:
    """Mode-``mode`` matricization of a rank-3 tensor."""
    if t.dim() != 3:
        raise WrongRankError(f"unfold expects a rank-3 tensor, got rank {t.dim()}", field="t")
    _check_mode(mode)
    a, b = _other_modes(mode)
    return t.permute(mode - 1, b - 1, a - 1).reshape(t.shape[mode - 1], -1)


def unfold_batch(batch: Tensor, mode: int) -> Tensor:
    """Unfold every tensor of an (n, I1, I2, I3) batch at once -> (n, I_m, I_a * I_b)."""
    if batch.dim() != 4:
        raise WrongRankError(f"unfold_batch expects (n, I1, I2, I3), got rank {batch.dim()}", field="batch")
    _check_mode(mode)
    a, b = _other_modes(mode)
    return batch.permute(0, mode, b, a).reshape(batch.shape[0], batch.shape[mode], -1)


def refold(m: Tensor, mode: int, shape: Sequence[int]) -> Tensor:
    """Inverse of :func:`unfold`."""
    if len(shape) != 3:
        raise WrongRankError(f"refold expects a rank-3 target shape, got {tuple(shape)}", field="shape")
    _check_mode(mode)
    a, b = _other_modes(mode)
    dims = [int(d) for d in shape]
    permuted = m.reshape(dims[mode - 1], dims[b - 1], dims[a - 1])
    # Position p of `order` holds the original mode at permuted axis p.
    order = [mode - 1, b - 1, a - 1]
    inverse = [order.index(axis) for axis in range(3)]
    return permuted.permute(*inverse).contiguous()


@dataclass(frozen=True)
class OrthonormalBasis:
    """r orthonormal columns spanning a subspace of R^ambient_dim."""
    columns: Tensor  # (ambient_dim, r)

    @property
    def ambient_dim(self) -> int:
        return int(self.columns.shape[0])

    @property
    def rank(self) -> int:
        return int(self.columns.shape[1])

    def projection(self) -> Tensor:
        return self.columns @ self.columns.transpose(-1, -2)


def default_subspace_rank(rows: int, cols: int, requested: int) -> int:
    return max(1, min(requested, rows, cols))


def left_singular_subspace(m: Tensor, r: int) -> OrthonormalBasis:
    """Span of the top-r left singular vectors of ``m``."""
    if m.dim() != 2:
        raise WrongRankError(f"expected a matrix, got rank {m.dim()}", field="m")
    if r < 1 or r > min(m.shape):
        raise RankTooLargeError(f"rank {r} not in [1, {min(m.shape)}] for a {tuple(m.shape)} matrix", field="r")
    if not torch.isfinite(m).all():
        raise NonFiniteInputError("matrix contains NaN or Inf values", field="m")
    if torch.linalg.matrix_norm(m).item() <= DEGENERATE_TOL:
        raise DegenerateInputError("cannot extract a subspace from a zero matrix", field="m")

    u, _, _ = torch.linalg.svd(m, full_matrices=False)
    return OrthonormalBasis(u[:, :r])


class _LeadingEigenProjector(torch.autograd.Function):
    """P = V_r V_r^T for the r leading eigenvectors of a stack of symmetric PSD matrices.

    P only depends on the gaps between leading and trailing eigenvalues, so the
    backward pass couples exactly those pairs. Ties inside either group (for
    example the repeated zero eigenvalues of a rank-deficient feature map) carry
    no gradient, and a leading/trailing tie at or below ``EIGEN_GAP_TOL`` is
    treated the same way.
    """

    @staticmethod
    def forward(ctx, gram: Tensor, r: int) -> Tensor:
        evals, evecs = torch.linalg.eigh(gram.double())
        # eigh sorts ascending: the leading subspace is the last r columns.
        leading = evecs[..., -r:]
        ctx.save_for_backward(evals, evecs)
        ctx.r = r
        ctx.out_dtype = gram.dtype
        return (leading @ leading.transpose(-1, -2)).to(gram.dtype)

    @staticmethod
    def backward(ctx, grad_p: Tensor):
        evals, evecs = ctx.saved_tensors
        r = ctx.r
        if evecs.shape[-1] == r:
            return torch.zeros_like(grad_p), None

        leading, trailing = evecs[..., -r:], evecs[..., :-r]
        g = grad_p.double()
        g = 0.5 * (g + g.transpose(-1, -2))

        gap = evals[..., -r:, None] - evals[..., None, :-r]
        scale = evals[..., -1:, None].abs().clamp_min(torch.finfo(torch.float64).tiny)
        usable = gap > EIGEN_GAP_TOL * scale
        safe_gap = torch.where(usable, gap, torch.ones_like(gap))
        coupling = leading.transpose(-1, -2) @ g @ trailing
        weights = torch.where(usable, 2.0 * coupling / safe_gap, torch.zeros_like(gap))

        grad_gram = trailing @ weights.transpose(-1, -2) @ leading.transpose(-1, -2)
        grad_gram = 0.5 * (grad_gram + grad_gram.transpose(-1, -2))
        return grad_gram.to(ctx.out_dtype), None


def batch_subspace_projectors(mats: Tensor, r: int) -> Tensor:
    """Projectors onto the top-r left singular subspaces of an (n, rows, cols) stack -> (n, rows, rows).

    Computed from the leading eigenvectors of M M^T, which span the same
    subspace as the leading left singular vectors of M.
    """
    if r < 1 or r > min(mats.shape[-2:]):
        raise RankTooLargeError(f"rank {r} exceeds min dimension of {tuple(mats.shape[-2:])}", field="r")
    norms = torch.linalg.matrix_norm(mats.detach())
    if (norms <= DEGENERATE_TOL).any():
        bad = torch.nonzero(norms <= DEGENERATE_TOL).flatten().tolist()
        raise DegenerateInputError(f"numerically zero inputs at batch positions {bad}", field="batch")
    return _LeadingEigenProjector.apply(mats @ mats.transpose(-1, -2), r)


def pairwise_sq_distances(rows: Tensor) -> Tensor:
    """Squared Euclidean distances between all rows of an (n, d) matrix.

    Differences are taken directly, so identical rows are exactly 0 apart in
    float32 too.
    """
    if rows.dim() != 2:
        raise WrongRankError(f"expected an (n, d) matrix, got rank {rows.dim()}", field="rows")
    if not torch.isfinite(rows).all():
        raise NonFiniteInputError("rows contain NaN or Inf values", field="rows")

    d = torch.cdist(rows, rows, compute_mode="donot_use_mm_for_euclid_dist").pow(2)
    # Symmetrize and pin the diagonal to exact zero.
    d = 0.5 * (d + d.T)
    off_diagonal = 1.0 - torch.eye(rows.shape[0], dtype=rows.dtype, device=rows.device)
    return d * off_diagonal


@torch.no_grad()
def median_pairwise_distance(rows: Tensor) -> float:
    """Median of the n(n-1)/2 distances; mean of the two middle values for even counts."""
    if rows.dim() != 2:
        raise WrongRankError(f"expected an (n, d) matrix, got rank {rows.dim()}", field="rows")
    if rows.shape[0] < 2:
        raise TooFewRowsError(f"need at least 2 rows, got {rows.shape[0]}", field="rows")
    if not torch.isfinite(rows).all():
        raise NonFiniteInputError("rows contain NaN or Inf values", field="rows")

    n = rows.shape[0]
    iu = torch.triu_indices(n, n, offset=1)
    distances = torch.sqrt(pairwise_sq_distances(rows)[iu[0], iu[1]])
    return float(torch.quantile(distances.double(), 0.5).item())
