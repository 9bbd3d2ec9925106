"""Hierarchical four-stage feature extractors.

Every backbone maps a (B, 3, H, W) image batch (H, W divisible by 32)
to a FeaturePyramid of maps at strides 4/8/16/32. The default `tiny`
variant is small enough to train on CPU; `pretrained_pvt` adapts an
externally provided pyramid transformer behind the same contract.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import NamedTuple

import torch
import torch.nn as nn

from .layers import BasicConv2d

STRIDES = (4, 8, 16, 32)


class FeaturePyramid(NamedTuple):
    f1: torch.Tensor  # (B, C1, H/4,  W/4)
    f2: torch.Tensor  # (B, C2, H/8,  W/8)
    f3: torch.Tensor  # (B, C3, H/16, W/16)
    f4: torch.Tensor  # (B, C4, H/32, W/32)


@dataclass(frozen=True)
class BackboneConfig:
    variant: str = "tiny"
    channels: tuple[int, int, int, int] = (16, 32, 64, 128)
    # "module:callable" producing a four-map pyramid module, pretrained_pvt only
    entrypoint: str | None = None

    def __post_init__(self) -> None:
        if self.variant not in ("tiny", "pretrained_pvt"):
            raise ValueError(f"unknown backbone variant {self.variant!r}")
        if len(self.channels) != 4:
            raise ValueError(f"channels must have 4 entries, got {self.channels}")
        if any(b <= a for a, b in zip(self.channels, self.channels[1:])):
            raise ValueError(f"channels must be strictly increasing, got {self.channels}")


def _check_input(images: torch.Tensor) -> None:
    if images.dim() != 4 or images.shape[1] != 3:
        raise ValueError(f"expected (B, 3, H, W) input, got shape {tuple(images.shape)}")
    h, w = images.shape[-2:]
    if h % 32 != 0 or w % 32 != 0:
        raise ValueError(f"input height and width must be divisible by 32, got {h}x{w}")


class ResidualBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv1 = BasicConv2d(channels, channels, 3, padding=1)
        self.conv2 = BasicConv2d(channels, channels, 3, padding=1, relu=False)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.relu(self.conv2(self.conv1(x)) + x)


class TinyBackbone(nn.Module):
    """Stem + four stages of stride-2 downsampling with two residual blocks each."""

    def __init__(self, channels: tuple[int, int, int, int] = (16, 32, 64, 128)):
        super().__init__()
        self.channels = tuple(channels)
        self.stem = BasicConv2d(3, channels[0], 3, stride=2, padding=1)
        stages = []
        prev = channels[0]
        for c in channels:
            stages.append(nn.Sequential(
                BasicConv2d(prev, c, 3, stride=2, padding=1),
                ResidualBlock(c),
                ResidualBlock(c),
            ))
            prev = c
        self.stages = nn.ModuleList(stages)

    def forward(self, images: torch.Tensor) -> FeaturePyramid:
        _check_input(images)
        x = self.stem(images)
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return FeaturePyramid(*feats)


class PyramidAdapter(nn.Module):
    """Wraps any module returning four maps, enforcing the pyramid contract."""

    def __init__(self, inner: nn.Module, channels: tuple[int, int, int, int]):
        super().__init__()
        self.inner = inner
        self.channels = tuple(channels)

    def forward(self, images: torch.Tensor) -> FeaturePyramid:
        _check_input(images)
        h, w = images.shape[-2:]
        feats = self.inner(images)
        if len(feats) != 4:
            raise ValueError(f"backbone returned {len(feats)} maps, expected 4")
        for i, (feat, stride, c) in enumerate(zip(feats, STRIDES, self.channels), start=1):
            expected = (images.shape[0], c, h // stride, w // stride)
            if tuple(feat.shape) != expected:
                raise ValueError(
                    f"pyramid level {i} has shape {tuple(feat.shape)}, expected {expected}"
                )
        return FeaturePyramid(*feats)


def build_backbone(config: BackboneConfig) -> nn.Module:
    if config.variant == "tiny":
        return TinyBackbone(config.channels)
    # pretrained_pvt: load the user-supplied factory and wrap it
    if not config.entrypoint:
        raise ValueError(
            "backbone variant 'pretrained_pvt' requires an entrypoint of the form "
            "'module:callable' returning a module that emits four pyramid maps"
        )
    module_name, _, attr = config.entrypoint.partition(":")
    if not attr:
        raise ValueError(f"malformed entrypoint {config.entrypoint!r}, expected 'module:callable'")
    factory = getattr(importlib.import_module(module_name), attr)
    return PyramidAdapter(factory(), config.channels)
