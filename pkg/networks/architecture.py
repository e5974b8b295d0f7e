"""Default architectures and shape bookkeeping."""

from typing import Any, Dict, List, Sequence, Tuple

from config.experiment import ArchitectureSpec, ConvBlockSpec
from core.errors import ShapeMismatchError

DEFAULT_CONV_CHANNELS = (32, 64)
DEFAULT_KERNEL_SIZE = 5
DEFAULT_HIDDEN_UNITS = 100
DEFAULT_RNN_HIDDEN = 32


def _check_image_shape(input_shape: Sequence[int]) -> Tuple[int, int, int]:
    if len(input_shape) != 3 or any(int(d) < 1 for d in input_shape):
        raise ShapeMismatchError(f"image input shape must be (C, H, W), got {tuple(input_shape)}")
    c, h, w = (int(d) for d in input_shape)
    return c, h, w


def default_cnn_architecture(input_shape: Sequence[int], k: int) -> ArchitectureSpec:
    """Two conv blocks (5x5 conv, ReLU, 2x2 max-pool, batch-norm), FC-100 hidden, FC-k head."""
    _check_image_shape(input_shape)
    if k < 2:
        raise ShapeMismatchError(f"need at least 2 clusters, got {k}", field="k")
    return ArchitectureSpec(
        kind="cnn",
        conv_blocks=[ConvBlockSpec(channels=c, kernel_size=DEFAULT_KERNEL_SIZE) for c in DEFAULT_CONV_CHANNELS],
        hidden_units=DEFAULT_HIDDEN_UNITS,
    )


def default_rnn_architecture() -> ArchitectureSpec:
    """Two-layer bidirectional GRU with 32 units per direction."""
    return ArchitectureSpec(kind="rnn", rnn_hidden_size=DEFAULT_RNN_HIDDEN, rnn_layers=2, bidirectional=True)


def conv_tap_shapes(spec: ArchitectureSpec, input_shape: Sequence[int]) -> List[Tuple[int, int, int]]:
    """(channels, height, width) of every conv block output."""
    _, h, w = _check_image_shape(input_shape)
    shapes = []
    for block in spec.conv_blocks:
        # 'same' padding for odd kernels; even kernels grow by one pixel.
        pad = block.kernel_size // 2
        h = h + 2 * pad - block.kernel_size + 1
        w = w + 2 * pad - block.kernel_size + 1
        h, w = h // block.pool, w // block.pool
        if h < 1 or w < 1:
            raise ShapeMismatchError(f"input {tuple(input_shape)} is too small for the conv stack")
        shapes.append((block.channels, h, w))
    return shapes


def recurrent_tap_width(spec: ArchitectureSpec) -> int:
    return spec.rnn_hidden_size * (2 if spec.bidirectional else 1)


def layer_summary(spec: ArchitectureSpec, input_shape: Sequence[int], k: int) -> List[Dict[str, Any]]:
    """Readable layer list with output shapes (per observation)."""
    layers: List[Dict[str, Any]] = []
    if spec.kind == "cnn":
        for i, (block, shape) in enumerate(zip(spec.conv_blocks, conv_tap_shapes(spec, input_shape)), start=1):
            layers.append({
                "layer": i,
                "kind": "conv_block",
                "kernel_size": block.kernel_size,
                "pool": block.pool,
                "batch_norm": block.batch_norm,
                "output_shape": list(shape),
            })
    else:
        for i in range(1, spec.rnn_layers + 1):
            layers.append({
                "layer": i,
                "kind": "bigru" if spec.bidirectional else "gru",
                "units": spec.rnn_hidden_size,
                "output_shape": [recurrent_tap_width(spec)],
            })
    layers.append({"kind": "hidden", "output_shape": [spec.hidden_units]})
    layers.append({"kind": "clustering_head", "output_shape": [k]})
    return layers
