"""Dataset format, loaders and synthetic generators."""
from .dataset import Dataset, DatasetMeta, check_known_attributes, load_dataset, save_dataset
from .synthetic import make_synthetic_blob_images, make_synthetic_sequences

__all__ = [
    "Dataset",
    "DatasetMeta",
    "check_known_attributes",
    "load_dataset",
    "save_dataset",
    "make_synthetic_blob_images",
    "make_synthetic_sequences",
]
