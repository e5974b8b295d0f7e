"""Cluster visualization: one row per predicted cluster, most confident members first."""

from pathlib import Path
from typing import List, Union

import numpy as np
from loguru import logger
from PIL import Image

from core.errors import NotAnImageDatasetError
from data.dataset import Dataset
from networks.model import DDCModel
from training.trainer import predict

DEFAULT_PER_ROW = 10
TILE_GAP = 1


def select_cluster_members(assignments: np.ndarray, per_row: int = DEFAULT_PER_ROW) -> List[List[int]]:
    """For each cluster, up to ``per_row`` member indices sorted by decreasing assignment entry."""
    assignments = np.asarray(assignments)
    pred = assignments.argmax(axis=1)
    confidence = assignments[np.arange(assignments.shape[0]), pred]

    rows = []
    for c in range(assignments.shape[1]):
        members = np.flatnonzero(pred == c)
        # stable: equal confidences keep index order
        order = np.argsort(-confidence[members], kind="stable")
        rows.append(members[order][:per_row].tolist())
    return rows


def _tiles(dataset: Dataset) -> np.ndarray:
    """(n, H, W) channel-averaged images scaled to [0, 1] over the whole dataset."""
    images = dataset.data.astype(np.float64).mean(axis=1)
    lo, hi = images.min(), images.max()
    if hi > lo:
        return (images - lo) / (hi - lo)
    return np.zeros_like(images)


def render_grid(tiles: np.ndarray, rows: List[List[int]], per_row: int) -> np.ndarray:
    """uint8 grid image; missing members stay blank (black)."""
    h, w = tiles.shape[1:]
    grid = np.zeros(
        (len(rows) * (h + TILE_GAP) - TILE_GAP, per_row * (w + TILE_GAP) - TILE_GAP), dtype=np.uint8
    )
    for r, members in enumerate(rows):
        for c, index in enumerate(members):
            top, left = r * (h + TILE_GAP), c * (w + TILE_GAP)
            grid[top:top + h, left:left + w] = np.rint(tiles[index] * 255.0).astype(np.uint8)
    return grid


def export_cluster_grid(
    model: DDCModel,
    dataset: Dataset,
    out_path: Union[str, Path],
    per_row: int = DEFAULT_PER_ROW,
) -> Path:
    """Write a PGM grid with one row per cluster of ``model``'s predictions on ``dataset``."""
    if not dataset.is_image:
        raise NotAnImageDatasetError(f"dataset '{dataset.meta.name}' holds sequences, not images")

    _, assignments = predict(model, dataset)
    rows = select_cluster_members(assignments, per_row)
    grid = render_grid(_tiles(dataset), rows, per_row)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid).save(out_path, format="PPM")
    logger.info(f"Cluster grid ({len(rows)} rows) written to {out_path}")
    return out_path
