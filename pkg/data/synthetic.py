"""Desk-scale synthetic datasets with known cluster structure."""

from typing import Tuple

import numpy as np
from loguru import logger

from data.dataset import Dataset, DatasetMeta, validate_dataset

BLOB_NOISE_STD = 0.05
SEQUENCE_NOISE_STD = 0.1


def blob_centers(k: int, side: int) -> np.ndarray:
    """k centers evenly spaced on a circle of radius 0.3 * side around the canvas center."""
    middle = (side - 1) / 2.0
    angles = 2.0 * np.pi * np.arange(k) / k
    radius = 0.3 * side
    return np.stack([middle + radius * np.sin(angles), middle + radius * np.cos(angles)], axis=1)


def make_synthetic_blob_images(k: int, per_cluster: int, side: int, seed: int) -> Dataset:
    """One bright Gaussian blob per cluster on a side x side canvas, plus pixel noise."""
    if k < 2:
        raise ValueError(f"need at least 2 clusters, got {k}")
    if side < 8:
        raise ValueError(f"side must be >= 8, got {side}")
    if per_cluster < 1:
        raise ValueError(f"per_cluster must be >= 1, got {per_cluster}")

    rng = np.random.default_rng(seed)
    n = k * per_cluster
    labels = rng.permutation(np.repeat(np.arange(k), per_cluster)).astype(np.int32)

    centers = blob_centers(k, side)[labels]
    jitter = rng.normal(0.0, 0.5, size=(n, 2))
    spread = side / 10.0

    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    dr = rows[None, :, :] - (centers[:, 0] + jitter[:, 0])[:, None, None]
    dc = cols[None, :, :] - (centers[:, 1] + jitter[:, 1])[:, None, None]
    images = np.exp(-(dr ** 2 + dc ** 2) / (2.0 * spread ** 2))
    images = images + rng.normal(0.0, BLOB_NOISE_STD, size=images.shape)
    data = images[:, None, :, :].astype(np.float32)

    meta = DatasetMeta(
        name=f"blobs_k{k}_s{side}_seed{seed}",
        kind="image",
        n=n,
        k=k,
        channels=1,
        height=side,
        width=side,
        has_labels=True,
    )
    logger.debug(f"Generated {meta.name}: n={n}")
    return validate_dataset(Dataset(meta=meta, data=data, labels=labels))


def cluster_frequency(c: int) -> int:
    """Cycles per sequence for cluster c: 1, 3, 5, ..."""
    return 1 + 2 * c


def make_synthetic_sequences(
    k: int, per_cluster: int, dim: int, length_range: Tuple[int, int], seed: int
) -> Dataset:
    """Noisy sinusoids; cluster c completes cluster_frequency(c) cycles over each sequence."""
    lo, hi = (int(v) for v in length_range)
    if k < 2:
        raise ValueError(f"need at least 2 clusters, got {k}")
    if dim < 1 or per_cluster < 1:
        raise ValueError("dim and per_cluster must be >= 1")
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid length range {length_range}")

    rng = np.random.default_rng(seed)
    n = k * per_cluster
    labels = rng.permutation(np.repeat(np.arange(k), per_cluster)).astype(np.int32)
    lengths = rng.integers(lo, hi + 1, size=n).astype(np.int32)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)

    data = np.zeros((n, hi, dim), dtype=np.float32)
    for i in range(n):
        t = np.arange(lengths[i]) / lengths[i]
        offsets = phases[i] + np.pi * np.arange(dim) / dim
        wave = np.sin(2.0 * np.pi * cluster_frequency(labels[i]) * t[:, None] + offsets[None, :])
        noise = rng.normal(0.0, SEQUENCE_NOISE_STD, size=wave.shape)
        data[i, : lengths[i]] = (wave + noise).astype(np.float32)

    meta = DatasetMeta(
        name=f"sines_k{k}_d{dim}_seed{seed}",
        kind="sequence",
        n=n,
        k=k,
        dim=dim,
        min_length=lo,
        max_length=hi,
        has_labels=True,
    )
    logger.debug(f"Generated {meta.name}: n={n}, lengths in [{lo}, {hi}]")
    return validate_dataset(Dataset(meta=meta, data=data, labels=labels, lengths=lengths))
