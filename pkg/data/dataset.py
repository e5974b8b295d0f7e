"""On-disk dataset container: ``meta.json`` + little-endian binary payloads.

Layout of a dataset directory::

    meta.json     DatasetMeta fields
    data.f32      float32, row-major; images (n, C, H, W), sequences (n, max_length, dim)
    labels.i32    int32, optional
    lengths.i32   int32, sequences only

Sequences are zero-padded to ``max_length``; padding must be exactly zero.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple, Union

import numpy as np
import torch
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import CorruptDatasetError
from networks.taps import SequenceBatch

FLOAT_DTYPE = np.dtype("<f4")
INT_DTYPE = np.dtype("<i4")

# Attribute contracts of the public sequence benchmarks.
KNOWN_SEQUENCE_DATASETS: Dict[str, Dict[str, object]] = {
    "character_trajectories": {"n": 1491, "k": 10, "dim": 3, "length_range": (109, 198)},
    "arabic_digits": {"n": 8800, "k": 10, "dim": 13, "length_range": (4, 93)},
}


class DatasetMeta(BaseModel):
    """Contents of ``meta.json``."""

    model_config = ConfigDict(extra="forbid")

    name: str
    kind: Literal["image", "sequence"]
    n: int = Field(..., gt=0)
    k: int = Field(..., ge=2)
    channels: Optional[int] = Field(None, ge=1)
    height: Optional[int] = Field(None, ge=1)
    width: Optional[int] = Field(None, ge=1)
    dim: Optional[int] = Field(None, ge=1)
    min_length: Optional[int] = Field(None, ge=1)
    max_length: Optional[int] = Field(None, ge=1)
    has_labels: bool = False

    @model_validator(mode="after")
    def check_kind_fields(self):
        if self.kind == "image":
            if None in (self.channels, self.height, self.width):
                raise ValueError("image datasets need channels, height and width")
        else:
            if None in (self.dim, self.min_length, self.max_length):
                raise ValueError("sequence datasets need dim, min_length and max_length")
            if self.min_length > self.max_length:
                raise ValueError("min_length exceeds max_length")
        return self

    @property
    def item_shape(self) -> Tuple[int, ...]:
        if self.kind == "image":
            return (self.channels, self.height, self.width)
        return (self.max_length, self.dim)

    @property
    def input_shape(self) -> Tuple[int, ...]:
        """Shape the model is built for: (C, H, W) or (dim,)."""
        if self.kind == "image":
            return (self.channels, self.height, self.width)
        return (self.dim,)


@dataclass
class Dataset:
    """Validated payload arrays plus their metadata."""
    meta: DatasetMeta
    data: np.ndarray
    labels: Optional[np.ndarray] = None
    lengths: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.meta.n

    @property
    def is_image(self) -> bool:
        return self.meta.kind == "image"

    def inputs(
        self, index: Optional[Union[np.ndarray, torch.Tensor]] = None, dtype: torch.dtype = torch.float32
    ) -> Union[torch.Tensor, SequenceBatch]:
        """Model inputs for the selected observations (all when ``index`` is None)."""
        if index is None:
            index = np.arange(self.n)
        index = np.asarray(index, dtype=np.int64)
        values = torch.from_numpy(np.ascontiguousarray(self.data[index])).to(dtype)
        if self.is_image:
            return values
        return SequenceBatch(values, torch.from_numpy(self.lengths[index].astype(np.int64)))


def validate_dataset(ds: Dataset) -> Dataset:
    """Check payload shapes, labels and padding against the metadata."""
    meta = ds.meta
    expected = (meta.n,) + meta.item_shape
    if ds.data.shape != expected:
        raise CorruptDatasetError(f"data shape {ds.data.shape} does not match meta {expected}", field="data")
    if not np.isfinite(ds.data).all():
        raise CorruptDatasetError("data contains NaN or Inf values", field="data")

    if meta.has_labels:
        if ds.labels is None or ds.labels.shape != (meta.n,):
            raise CorruptDatasetError("labels missing or of wrong length", field="labels")
        if ds.labels.min() < 0 or ds.labels.max() >= meta.k:
            raise CorruptDatasetError(f"labels outside [0, {meta.k})", field="labels")

    if meta.kind == "sequence":
        if ds.lengths is None or ds.lengths.shape != (meta.n,):
            raise CorruptDatasetError("lengths missing or of wrong length", field="lengths")
        if ds.lengths.min() < meta.min_length or ds.lengths.max() > meta.max_length:
            raise CorruptDatasetError(
                f"lengths outside [{meta.min_length}, {meta.max_length}]", field="lengths"
            )
        steps = np.arange(meta.max_length)[None, :]
        padding = steps >= ds.lengths[:, None]
        if np.any(ds.data[padding] != 0):
            raise CorruptDatasetError("sequence padding is not exactly zero", field="data")
    return ds


def _read_payload(path: Path, dtype: np.dtype, count: int, name: str) -> np.ndarray:
    if not path.exists():
        raise CorruptDatasetError(f"missing payload {path.name}", field=name)
    raw = path.read_bytes()
    if len(raw) != count * dtype.itemsize:
        raise CorruptDatasetError(
            f"{path.name} holds {len(raw)} bytes, expected {count * dtype.itemsize}", field=name
        )
    return np.frombuffer(raw, dtype=dtype).copy()


def load_dataset(path: Union[str, Path]) -> Dataset:
    """Load and validate a dataset directory."""
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise CorruptDatasetError(f"{path} has no meta.json", field="meta")
    try:
        meta = DatasetMeta.model_validate(json.loads(meta_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as e:
        raise CorruptDatasetError(f"invalid meta.json: {e}", field="meta") from e

    item_count = int(np.prod(meta.item_shape))
    data = _read_payload(path / "data.f32", FLOAT_DTYPE, meta.n * item_count, "data")
    data = data.astype(np.float32).reshape((meta.n,) + meta.item_shape)

    labels = None
    if meta.has_labels:
        labels = _read_payload(path / "labels.i32", INT_DTYPE, meta.n, "labels").astype(np.int32)

    lengths = None
    if meta.kind == "sequence":
        lengths = _read_payload(path / "lengths.i32", INT_DTYPE, meta.n, "lengths").astype(np.int32)

    ds = validate_dataset(Dataset(meta=meta, data=data, labels=labels, lengths=lengths))
    logger.info(f"Loaded dataset '{meta.name}' ({meta.kind}, n={meta.n}, k={meta.k}) from {path}")
    return ds


def save_dataset(ds: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset directory; the round trip through :func:`load_dataset` is bit-exact."""
    validate_dataset(ds)
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    (path / "meta.json").write_text(
        json.dumps(ds.meta.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (path / "data.f32").write_bytes(np.ascontiguousarray(ds.data, dtype=FLOAT_DTYPE).tobytes())
    if ds.meta.has_labels:
        (path / "labels.i32").write_bytes(np.ascontiguousarray(ds.labels, dtype=INT_DTYPE).tobytes())
    if ds.meta.kind == "sequence":
        (path / "lengths.i32").write_bytes(np.ascontiguousarray(ds.lengths, dtype=INT_DTYPE).tobytes())

    logger.info(f"Saved dataset '{ds.meta.name}' to {path}")
    return path


def check_known_attributes(meta: DatasetMeta, name: str) -> Dict[str, bool]:
    """Compare a sequence dataset's meta with the published attributes of ``name``."""
    if name not in KNOWN_SEQUENCE_DATASETS:
        raise CorruptDatasetError(f"unknown dataset '{name}'; known: {sorted(KNOWN_SEQUENCE_DATASETS)}")
    expected = KNOWN_SEQUENCE_DATASETS[name]
    lo, hi = expected["length_range"]
    checks = {
        "kind": meta.kind == "sequence",
        "n": meta.n == expected["n"],
        "k": meta.k == expected["k"],
        "dim": meta.dim == expected["dim"],
        "lengths": meta.min_length is not None and lo <= meta.min_length and meta.max_length <= hi,
    }
    failed = [key for key, ok in checks.items() if not ok]
    if failed:
        raise CorruptDatasetError(f"dataset does not match the {name} attributes: {failed}")
    return checks
