"""Convert variable-length sequence collections to the dataset directory format.

Real benchmark files are not downloaded here. To import one of them, parse
it with whatever reader fits the source archive, then pass a list of
(length_i, dim) arrays plus integer labels to
:func:`sequences_to_dataset`, and save the result with
:func:`data.dataset.save_dataset`. For Character Trajectories keep only the
first 10 characters. Labels must be remapped to 0..k-1 in both cases.
Afterwards :func:`data.dataset.check_known_attributes` verifies the
published attributes.
"""

from typing import Optional, Sequence

import numpy as np
from loguru import logger

from core.errors import CorruptDatasetError
from data.dataset import Dataset, DatasetMeta, validate_dataset


def remap_labels(labels: Sequence[int]) -> np.ndarray:
    """Map arbitrary label values onto 0..k-1, preserving sorted order."""
    values = np.asarray(labels)
    _, mapped = np.unique(values, return_inverse=True)
    return mapped.astype(np.int32)


def sequences_to_dataset(
    name: str,
    sequences: Sequence[np.ndarray],
    labels: Optional[Sequence[int]] = None,
    k: Optional[int] = None,
) -> Dataset:
    """Zero-pad ``sequences`` (each (length, dim)) into a validated sequence Dataset."""
    if not sequences:
        raise CorruptDatasetError("no sequences given")
    arrays = [np.asarray(s, dtype=np.float32) for s in sequences]
    arrays = [a[:, None] if a.ndim == 1 else a for a in arrays]
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise CorruptDatasetError(f"sequences have inconsistent element dims {sorted(dims)}")
    lengths = np.array([a.shape[0] for a in arrays], dtype=np.int32)
    if lengths.min() < 1:
        raise CorruptDatasetError("empty sequence in input")

    dim = dims.pop()
    data = np.zeros((len(arrays), int(lengths.max()), dim), dtype=np.float32)
    for i, a in enumerate(arrays):
        data[i, : a.shape[0]] = a

    mapped = remap_labels(labels) if labels is not None else None
    if k is None:
        k = int(mapped.max()) + 1 if mapped is not None else 2

    meta = DatasetMeta(
        name=name,
        kind="sequence",
        n=len(arrays),
        k=k,
        dim=dim,
        min_length=int(lengths.min()),
        max_length=int(lengths.max()),
        has_labels=mapped is not None,
    )
    logger.info(f"Imported {meta.n} sequences for '{name}' (dim={dim}, lengths [{meta.min_length}, {meta.max_length}])")
    return validate_dataset(Dataset(meta=meta, data=data, labels=mapped, lengths=lengths))
