"""Encoder-decoder network for dense biomass regression on sparse labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import ShapeMismatch


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 15
    depth: int = 4
    base_width: int = 32
    # feature normalization: batch-wise by default; "groupnorm" avoids running
    # statistics but converges far slower at desk-scale budgets. Recorded in
    # the artifact header so runs are self-describing.
    norm_layer: str = "batchnorm"
    activation: str = "relu"
    dropout: float = 0.0

    def __post_init__(self):
        if self.in_channels < 1 or self.depth < 1 or self.base_width < 1:
            raise ValueError("in_channels, depth and base_width must be >= 1")
        if self.norm_layer not in ("batchnorm", "groupnorm"):
            raise ValueError(f"unknown norm_layer {self.norm_layer!r}")
        if self.activation != "relu" or self.dropout != 0.0:
            raise ValueError("only relu activation without dropout is implemented")

    @property
    def divisor(self) -> int:
        return 2 ** self.depth


def _norm(kind: str, channels: int) -> nn.Module:
    if kind == "batchnorm":
        return nn.BatchNorm2d(channels)
    return nn.GroupNorm(min(8, channels), channels)


def _conv_block(in_ch: int, out_ch: int, norm: str) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        _norm(norm, out_ch),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        _norm(norm, out_ch),
        nn.ReLU(inplace=True),
    )


class MaskedUNet(nn.Module):
    """Depth-N UNet: double-conv encoder stages, mirrored decoder with skips,
    linear 1x1 head (no final activation; clamping happens only at map export).

    ``output_offset`` / ``output_scale`` form a fixed affine output map so the
    convolutional trunk works near unit scale while predictions stay in raw
    target units; they are buffers set from the training supervision, not
    trainable parameters.
    """

    def __init__(self, config: UNetConfig, output_offset: float = 0.0,
                 output_scale: float = 1.0):
        super().__init__()
        self.config = config
        self.register_buffer("output_offset", torch.tensor(float(output_offset)))
        self.register_buffer("output_scale", torch.tensor(float(output_scale)))
        w = config.base_width
        widths = [w * (2 ** i) for i in range(config.depth)]

        self.encoders = nn.ModuleList()
        in_ch = config.in_channels
        for width in widths:
            self.encoders.append(_conv_block(in_ch, width, config.norm_layer))
            in_ch = width
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _conv_block(widths[-1], widths[-1] * 2, config.norm_layer)

        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        up_in = widths[-1] * 2
        for width in reversed(widths):
            self.upsamplers.append(nn.ConvTranspose2d(up_in, width, 2, stride=2))
            self.decoders.append(_conv_block(width * 2, width, config.norm_layer))
            up_in = width
        self.head = nn.Conv2d(widths[0], 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeMismatch(
                f"expected (N, {self.config.in_channels}, H, W), got {tuple(x.shape)}")
        if x.shape[2] % self.config.divisor or x.shape[3] % self.config.divisor:
            raise ShapeMismatch(
                f"tile side must be divisible by {self.config.divisor}, got {tuple(x.shape[2:])}")
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = up(x)
            x = dec(torch.cat([x, skip], dim=1))
        return self.head(x) * self.output_scale + self.output_offset


def unet_forward(model: MaskedUNet, tile: np.ndarray) -> np.ndarray:
    """Eval-mode forward of one (H, W, C) tile; returns the (H, W) prediction."""
    model.eval()
    with torch.no_grad():
        x = torch.from_numpy(np.moveaxis(tile, 2, 0)[None]).float()
        out = model(x)
    return out[0, 0].numpy().astype(np.float64)
