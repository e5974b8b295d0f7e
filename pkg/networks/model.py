"""DDC model: backbone with taps, hidden representation and the clustering head."""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import torch
import torch.nn as nn
from loguru import logger
from torch import Tensor

from config.experiment import ArchitectureSpec
from core.errors import ShapeMismatchError
from networks.backbones import ConvBackbone, RecurrentBackbone
from networks.taps import LayerTap, SequenceBatch, TapKind

ModelParams = Dict[str, Tensor]


@dataclass
class ForwardOutput:
    """Everything one forward pass produces."""
    taps: List[LayerTap]
    hidden: Tensor
    assignments: Tensor


class DDCModel(nn.Module):
    """Backbone -> FC hidden (ReLU, batch-norm) -> FC k -> softmax."""

    def __init__(self, spec: ArchitectureSpec, input_shape: Sequence[int], n_clusters: int):
        super().__init__()
        self.spec = spec
        self.input_shape = tuple(int(d) for d in input_shape)
        self.n_clusters = int(n_clusters)

        if spec.kind == "cnn":
            self.backbone = ConvBackbone(spec, self.input_shape)
            self.tap_kind = TapKind.CONV_MAP
        else:
            if len(self.input_shape) != 1:
                raise ShapeMismatchError(f"recurrent input shape must be (dim,), got {self.input_shape}")
            self.backbone = RecurrentBackbone(spec, self.input_shape[0])
            self.tap_kind = TapKind.LAST_HIDDEN_STATE

        hidden_layers: List[nn.Module] = [
            nn.Linear(self.backbone.output_dimension, spec.hidden_units),
            nn.ReLU(),
        ]
        if spec.hidden_batch_norm:
            hidden_layers.append(nn.BatchNorm1d(spec.hidden_units))
        self.hidden = nn.Sequential(*hidden_layers)
        self.head = nn.Linear(spec.hidden_units, self.n_clusters)

    @property
    def n_taps(self) -> int:
        return self.spec.n_taps

    def forward(self, x: Tensor, lengths: Optional[Tensor] = None) -> ForwardOutput:
        if self.spec.kind == "cnn":
            raw_taps = self.backbone(x)
        else:
            raw_taps = self.backbone(x, lengths)

        taps = [LayerTap(layer_index=i, kind=self.tap_kind, batch=t) for i, t in enumerate(raw_taps, start=1)]
        hidden = self.hidden(raw_taps[-1].flatten(start_dim=1))
        assignments = torch.softmax(self.head(hidden), dim=1)
        return ForwardOutput(taps=taps, hidden=hidden, assignments=assignments)


def build_model(
    spec: ArchitectureSpec,
    input_shape: Sequence[int],
    n_clusters: int,
    seed: int,
    dtype: torch.dtype = torch.float32,
) -> DDCModel:
    """Construct a model whose initialization depends only on ``seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = DDCModel(spec, input_shape, n_clusters)
    model = model.to(dtype)
    logger.debug(
        f"Built {spec.kind} model: input={tuple(input_shape)}, k={n_clusters}, "
        f"params={sum(p.numel() for p in model.parameters())}, seed={seed}"
    )
    return model


def model_params(model: nn.Module) -> ModelParams:
    """Detached copy of every parameter and buffer, in state-dict order."""
    return OrderedDict((name, t.detach().clone()) for name, t in model.state_dict().items())


def cnn_forward(images: Tensor, model: DDCModel) -> Tuple[List[LayerTap], Tensor, Tensor]:
    """Forward a (n, C, H, W) image batch -> (taps, hidden, A)."""
    if model.spec.kind != "cnn":
        raise ShapeMismatchError("cnn_forward called on a recurrent model")
    if images.dim() != 4 or tuple(images.shape[1:]) != model.input_shape:
        raise ShapeMismatchError(
            f"expected images of shape (n, {', '.join(map(str, model.input_shape))}), got {tuple(images.shape)}",
            field="images",
        )
    out = model(images)
    return out.taps, out.hidden, out.assignments


def rnn_forward(seqs: SequenceBatch, model: DDCModel) -> Tuple[List[LayerTap], Tensor, Tensor]:
    """Forward a padded sequence batch -> (taps, hidden, A)."""
    if model.spec.kind != "rnn":
        raise ShapeMismatchError("rnn_forward called on a convolutional model")
    if seqs.dim != model.input_shape[0]:
        raise ShapeMismatchError(f"expected element dim {model.input_shape[0]}, got {seqs.dim}", field="seqs")
    out = model(seqs.values, seqs.lengths)
    return out.taps, out.hidden, out.assignments


def forward_inputs(model: DDCModel, inputs: Union[Tensor, SequenceBatch]) -> ForwardOutput:
    """Dispatch to the right forward for either input kind."""
    if isinstance(inputs, SequenceBatch):
        taps, hidden, a = rnn_forward(inputs, model)
    else:
        taps, hidden, a = cnn_forward(inputs, model)
    return ForwardOutput(taps=taps, hidden=hidden, assignments=a)
