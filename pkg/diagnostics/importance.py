"""Input-gradient importance maps for the main loss and the companion objectives.

The importance of a pixel is the absolute gradient of the chosen loss with
respect to that pixel, summed over channels and divided by the largest value
of the observation. An observation whose gradient vanishes everywhere gets
an all-zero map.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import torch
from loguru import logger
from PIL import Image
from torch import Tensor

from config.experiment import TrainConfig
from core.companion import CompanionWeights, companion_loss, main_kernel
from core.errors import LayerWithoutCompanionError, NotAnImageDatasetError, ShapeMismatchError
from core.objective import ddc_loss
from networks.model import DDCModel

# Selects the main DDC loss on the hidden representation instead of a companion.
MAIN_LOSS_LAYER = 0


@dataclass
class ImportanceMap:
    layer_index: int
    observation: int
    values: np.ndarray
    raw_max: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "layer": self.layer_index,
            "observation": self.observation,
            "raw_max": self.raw_max,
            "values": self.values.tolist(),
        }


def check_importance_layer(model: DDCModel, layer_index: int, cfg: TrainConfig) -> None:
    if model.spec.kind != "cnn":
        raise NotAnImageDatasetError("importance maps need an image model")
    if layer_index == MAIN_LOSS_LAYER:
        return
    weights = CompanionWeights(lam=cfg.companion_lambda, per_layer_enabled=cfg.companion_layers)
    if not 1 <= layer_index <= model.n_taps or not weights.enabled(layer_index - 1):
        raise LayerWithoutCompanionError(
            f"layer {layer_index} has no companion objective (model has {model.n_taps} taps)",
            field="layer_index",
        )


def input_gradient(
    model: DDCModel,
    images: Tensor,
    layer_index: int,
    cfg: TrainConfig,
    loss_scale: float = 1.0,
) -> Tensor:
    """d(loss_scale * loss)/d(images) with the model in eval mode; same shape as ``images``."""
    check_importance_layer(model, layer_index, cfg)
    if images.dim() != 4 or tuple(images.shape[1:]) != model.input_shape:
        raise ShapeMismatchError(f"images of shape {tuple(images.shape)} do not fit the model", field="images")

    was_training = model.training
    model.eval()
    try:
        x = images.detach().clone().requires_grad_(True)
        out = model(x)
        if layer_index == MAIN_LOSS_LAYER:
            loss = ddc_loss(out.assignments, main_kernel(out.hidden, cfg.kernel), weights=cfg.term_weights).total
        else:
            loss = companion_loss(out.taps[layer_index - 1], out.assignments, cfg.kernel).total
        (grad,) = torch.autograd.grad(loss_scale * loss, x)
    finally:
        model.train(was_training)
    return grad


def importance_map(
    model: DDCModel,
    images: Tensor,
    layer_index: int,
    cfg: TrainConfig,
    loss_scale: float = 1.0,
) -> List[ImportanceMap]:
    """One max-normalized (H, W) map per observation in ``images``."""
    grad = input_gradient(model, images, layer_index, cfg, loss_scale)
    magnitude = grad.abs().sum(dim=1).detach().to(torch.float64)
    peaks = magnitude.flatten(start_dim=1).max(dim=1).values

    maps = []
    for i in range(magnitude.shape[0]):
        peak = float(peaks[i])
        if peak > 0 and np.isfinite(peak):
            values = (magnitude[i] / peak).cpu().numpy()
        else:
            values = np.zeros(tuple(magnitude.shape[1:]), dtype=np.float64)
        maps.append(ImportanceMap(layer_index=layer_index, observation=i, values=values, raw_max=peak))
    return maps


def to_grayscale(values: np.ndarray) -> Image.Image:
    """[0, 1] map -> 8-bit grayscale image."""
    pixels = np.clip(np.rint(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(pixels)


def export_importance_maps(
    maps: Sequence[ImportanceMap],
    out_dir: Union[str, Path],
    observation_ids: Optional[Sequence[int]] = None,
) -> Path:
    """Write ``layer{L}_obs{i}.pgm`` per map and one ``importance.json`` listing them all."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_path = out_dir / "importance.json"

    existing: List[Dict[str, object]] = []
    if index_path.exists():
        existing = json.loads(index_path.read_text(encoding="utf-8")).get("maps", [])

    entries = []
    for position, m in enumerate(maps):
        obs = observation_ids[position] if observation_ids is not None else m.observation
        file_name = f"layer{m.layer_index}_obs{obs}.pgm"
        to_grayscale(m.values).save(out_dir / file_name, format="PPM")
        entry = m.to_dict()
        entry.update({"observation": int(obs), "file": file_name})
        entries.append(entry)

    written = {(e["layer"], e["observation"]) for e in entries}
    kept = [e for e in existing if (e["layer"], e["observation"]) not in written]
    merged = sorted(kept + entries, key=lambda e: (e["layer"], e["observation"]))
    index_path.write_text(json.dumps({"maps": merged}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(entries)} importance map(s) to {out_dir}")
    return index_path
