"""Tensor algebra, kernels and clustering objectives."""
