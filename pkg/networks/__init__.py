"""Backbones with layer taps and the DDC clustering head."""
from .architecture import default_cnn_architecture, default_rnn_architecture, layer_summary
from .model import DDCModel, ForwardOutput, build_model, cnn_forward, forward_inputs, model_params, rnn_forward
from .taps import LayerTap, SequenceBatch, TapKind

__all__ = [
    "DDCModel",
    "ForwardOutput",
    "LayerTap",
    "SequenceBatch",
    "TapKind",
    "build_model",
    "cnn_forward",
    "default_cnn_architecture",
    "default_rnn_architecture",
    "forward_inputs",
    "layer_summary",
    "model_params",
    "rnn_forward",
]
