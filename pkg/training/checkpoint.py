"""Checkpoint directory: ``manifest.json`` plus one little-endian row-major ``.bin`` per array.

The manifest has no timestamps and sorted keys, so saving the same params
twice gives byte-identical directories.
"""

import json
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import torch
from loguru import logger

from config.experiment import ArchitectureSpec, TrainConfig
from config.settings import settings
from core.errors import CorruptCheckpointError
from networks.model import DDCModel, ModelParams, build_model
from tracking.audit_logger import EventType, get_audit_logger

MANIFEST_NAME = "manifest.json"

_SUPPORTED_DTYPES = {"float32", "float64", "int64", "int32"}


def _array_file(index: int, name: str) -> str:
    return f"{index:03d}_{name.replace('/', '_')}.bin"


def save_checkpoint(
    params: ModelParams,
    path: Union[str, Path],
    config: Optional[TrainConfig] = None,
    architecture: Optional[ArchitectureSpec] = None,
    input_shape: Optional[Sequence[int]] = None,
    n_clusters: Optional[int] = None,
) -> Path:
    """Write ``params`` (and, optionally, what is needed to rebuild the model) to ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    arrays = []
    for index, (name, tensor) in enumerate(params.items()):
        array = tensor.detach().cpu().numpy()
        dtype = array.dtype.name
        if dtype not in _SUPPORTED_DTYPES:
            raise CorruptCheckpointError(f"unsupported dtype {dtype} for '{name}'", field=name)
        file_name = _array_file(index, name)
        little = np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))
        (path / file_name).write_bytes(little.tobytes())
        arrays.append({"name": name, "file": file_name, "shape": list(array.shape), "dtype": dtype})

    manifest: Dict[str, Any] = {"version": settings.checkpoint_version, "arrays": arrays}
    if architecture is not None:
        manifest["model"] = {
            "architecture": architecture.model_dump(mode="json"),
            "input_shape": [int(d) for d in input_shape],
            "n_clusters": int(n_clusters),
        }
    if config is not None:
        manifest["config"] = config.to_dict()

    (path / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Saved checkpoint with {len(arrays)} arrays to {path}")
    get_audit_logger().log_event(
        EventType.CHECKPOINT, f"saved checkpoint to {path}", metadata={"path": str(path), "arrays": len(arrays)}
    )
    return path


def read_manifest(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise CorruptCheckpointError(f"{path} has no {MANIFEST_NAME}", field="manifest")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CorruptCheckpointError(f"invalid manifest: {e}", field="manifest") from e

    version = manifest.get("version")
    if version != settings.checkpoint_version:
        raise CorruptCheckpointError(
            f"checkpoint version {version} does not match supported version {settings.checkpoint_version}",
            field="version",
        )
    if not isinstance(manifest.get("arrays"), list):
        raise CorruptCheckpointError("manifest lists no arrays", field="arrays")
    return manifest


def load_checkpoint(path: Union[str, Path]) -> ModelParams:
    """Read every array listed in the manifest; bit-exact inverse of :func:`save_checkpoint`."""
    path = Path(path)
    manifest = read_manifest(path)

    params: ModelParams = OrderedDict()
    for entry in manifest["arrays"]:
        name, dtype = entry["name"], entry["dtype"]
        if dtype not in _SUPPORTED_DTYPES:
            raise CorruptCheckpointError(f"unsupported dtype {dtype} for '{name}'", field=name)
        shape = tuple(int(d) for d in entry["shape"])
        little = np.dtype(dtype).newbyteorder("<")
        file_path = path / entry["file"]
        if not file_path.exists():
            raise CorruptCheckpointError(f"missing array file {entry['file']}", field=name)

        raw = file_path.read_bytes()
        expected = int(np.prod(shape, dtype=np.int64)) * little.itemsize
        if len(raw) != expected:
            raise CorruptCheckpointError(
                f"array '{name}' holds {len(raw)} bytes, manifest shape {shape} needs {expected}", field=name
            )
        array = np.frombuffer(raw, dtype=little).astype(np.dtype(dtype)).reshape(shape)
        params[name] = torch.from_numpy(array.copy())
    return params


def load_model(path: Union[str, Path]) -> DDCModel:
    """Rebuild the model described in the manifest and load its parameters."""
    manifest = read_manifest(path)
    meta = manifest.get("model")
    if meta is None:
        raise CorruptCheckpointError("checkpoint carries no model description", field="model")

    spec = ArchitectureSpec.model_validate(meta["architecture"])
    params = load_checkpoint(path)
    dtype = next((t.dtype for t in params.values() if t.is_floating_point()), torch.float32)
    model = build_model(spec, meta["input_shape"], meta["n_clusters"], seed=0, dtype=dtype)
    try:
        model.load_state_dict(params, strict=True)
    except RuntimeError as e:
        raise CorruptCheckpointError(f"parameters do not fit the described model: {e}", field="arrays") from e
    model.eval()
    return model


def load_checkpoint_config(path: Union[str, Path]) -> Optional[TrainConfig]:
    config = read_manifest(path).get("config")
    return TrainConfig.model_validate(config) if config is not None else None
