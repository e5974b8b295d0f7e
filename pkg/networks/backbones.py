"""Trainable backbones that expose one tap per layer."""

from typing import List, Sequence

import torch
import torch.nn as nn
from torch import Tensor

from config.experiment import ArchitectureSpec
from networks.architecture import conv_tap_shapes, recurrent_tap_width


class ConvBackbone(nn.Module):
    """Stack of conv -> ReLU -> max-pool -> batch-norm blocks."""

    def __init__(self, spec: ArchitectureSpec, input_shape: Sequence[int]):
        super().__init__()
        self.input_shape = tuple(int(d) for d in input_shape)
        self.tap_shapes = conv_tap_shapes(spec, self.input_shape)

        blocks = []
        in_channels = self.input_shape[0]
        for block in spec.conv_blocks:
            layers: List[nn.Module] = [
                nn.Conv2d(in_channels, block.channels, block.kernel_size, padding=block.kernel_size // 2),
                nn.ReLU(),
                nn.MaxPool2d(block.pool),
            ]
            if block.batch_norm:
                layers.append(nn.BatchNorm2d(block.channels))
            blocks.append(nn.Sequential(*layers))
            in_channels = block.channels
        self.blocks = nn.ModuleList(blocks)

        c, h, w = self.tap_shapes[-1]
        self.output_dimension = c * h * w

    def forward(self, x: Tensor) -> List[Tensor]:
        taps = []
        for block in self.blocks:
            x = block(x)
            taps.append(x)
        return taps


class RecurrentBackbone(nn.Module):
    """Stacked (bi)directional GRU layers over packed sequences; taps are the last valid states."""

    def __init__(self, spec: ArchitectureSpec, input_dim: int):
        super().__init__()
        self.bidirectional = spec.bidirectional
        width = recurrent_tap_width(spec)
        self.layers = nn.ModuleList([
            nn.GRU(
                input_size=input_dim if i == 0 else width,
                hidden_size=spec.rnn_hidden_size,
                num_layers=1,
                batch_first=True,
                bidirectional=spec.bidirectional,
            )
            for i in range(spec.rnn_layers)
        ])
        self.output_dimension = width

    def forward(self, values: Tensor, lengths: Tensor) -> List[Tensor]:
        packed = nn.utils.rnn.pack_padded_sequence(
            values, lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        taps = []
        for gru in self.layers:
            packed, hidden = gru(packed)
            # hidden comes back in the caller's batch order; directions are concatenated.
            if self.bidirectional:
                taps.append(torch.cat([hidden[-2], hidden[-1]], dim=1))
            else:
                taps.append(hidden[-1])
        return taps
