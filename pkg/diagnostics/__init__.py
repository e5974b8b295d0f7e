"""Importance maps, objective-mismatch curves and cluster grids."""
from .cluster_grid import export_cluster_grid, select_cluster_members
from .importance import MAIN_LOSS_LAYER, ImportanceMap, export_importance_maps, importance_map
from .ofm import OFMReport, loss_accuracy_correlation, ofm_curves

__all__ = [
    "MAIN_LOSS_LAYER",
    "ImportanceMap",
    "OFMReport",
    "export_cluster_grid",
    "export_importance_maps",
    "importance_map",
    "loss_accuracy_correlation",
    "ofm_curves",
    "select_cluster_members",
]
