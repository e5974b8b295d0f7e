"""Shared pytest setup: isolated log directory, per-test seeding, the ``slow`` marker."""

import os
import tempfile

# Must be set before config.settings is imported anywhere.
os.environ.setdefault("DTKC_LOG_DIR", tempfile.mkdtemp(prefix="dtkc-test-logs-"))
os.environ.pop("DTKC_SEED", None)

import numpy as np
import pytest
import torch

from config.experiment import ArchitectureSpec, ConvBlockSpec, KernelConfig, TrainConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end acceptance runs (minutes of CPU)")


def pytest_collection_modifyitems(config, items):
    if "slow" in (config.option.markexpr or ""):
        return
    skip_slow = pytest.mark.skip(reason="acceptance run; select with -m slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def seeded():
    torch.manual_seed(0)
    np.random.seed(0)
    torch.set_num_threads(1)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cnn_spec():
    """Two 3x3 conv blocks with few channels: fast and still tensor-kernel friendly."""
    return ArchitectureSpec(
        kind="cnn",
        conv_blocks=[ConvBlockSpec(channels=3, kernel_size=3), ConvBlockSpec(channels=4, kernel_size=3)],
        hidden_units=8,
    )


@pytest.fixture
def tiny_rnn_spec():
    return ArchitectureSpec(kind="rnn", rnn_hidden_size=4, rnn_layers=2, hidden_units=6)


@pytest.fixture
def fixed_kernel():
    """Bandwidth that does not move with the input (needed for finite differences)."""
    return KernelConfig(fixed_sigma=2.0)


@pytest.fixture
def tiny_train_config(tiny_cnn_spec):
    return TrainConfig(batch_size=12, epochs=2, n_runs=2, seed=3, architecture=tiny_cnn_spec)


@pytest.fixture
def tiny_blobs():
    from data.synthetic import make_synthetic_blob_images

    return make_synthetic_blob_images(k=3, per_cluster=8, side=12, seed=0)


@pytest.fixture
def tiny_sequences():
    from data.synthetic import make_synthetic_sequences

    return make_synthetic_sequences(k=2, per_cluster=6, dim=2, length_range=(4, 7), seed=0)
