"""Progressive decoders and prior extraction.

The multi-scale progressive decoder refines channel-unified pyramid
features top-down: each shallower map is gated by its deeper neighbor
(element-wise product plus residual) and fused with the running decoded
map. The decoded output is a one-channel rough logit map, from which a
position prior (sigmoid) and a boundary prior (fixed Laplacian magnitude)
are derived. A plain upsample-concat decoder is kept as the ablation
baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .layers import BasicConv2d

# Fixed edge-extraction kernel; annihilates constants.
LAPLACIAN_KERNEL = ((0.0, 1.0, 0.0), (1.0, -4.0, 1.0), (0.0, 1.0, 0.0))


@dataclass
class RoughPrediction:
    m1_logits: torch.Tensor  # (B, 1, H, W)
    m1_prob: torch.Tensor    # sigmoid of the logits


@dataclass
class PriorPair:
    position: torch.Tensor  # (B, 1, H, W) in (0, 1)
    boundary: torch.Tensor  # (B, 1, H, W) >= 0


def _upsample_to(x: torch.Tensor, ref: torch.Tensor) -> torch.Tensor:
    return F.interpolate(x, size=ref.shape[-2:], mode="bilinear", align_corners=False)


def progressive_gate(shallow: torch.Tensor, deep_raw: torch.Tensor) -> torch.Tensor:
    """Gating term: shallow (x) up(deep) (+) shallow, before any fusion conv."""
    return shallow * _upsample_to(deep_raw, shallow) + shallow


class FuseStep(nn.Module):
    """Fuse one decoded deep map and one gated shallow map at the shallow scale."""

    def __init__(self, channels: int):
        super().__init__()
        self.fuse = BasicConv2d(2 * channels, channels, 3, padding=1)

    def forward(self, shallow, deep_hat, deep_raw):
        if shallow.shape[1] != deep_hat.shape[1] or shallow.shape[1] != deep_raw.shape[1]:
            raise ValueError(
                "channel mismatch in fusion step: "
                f"{shallow.shape[1]}, {deep_hat.shape[1]}, {deep_raw.shape[1]}"
            )
        gated = progressive_gate(shallow, deep_raw)
        return self.fuse(torch.cat([_upsample_to(deep_hat, shallow), gated], dim=1))


class ProgressiveDecoder(nn.Module):
    """Top-down gated fusion over four channel-unified maps -> stride-4 logits."""

    def __init__(self, channels: int):
        super().__init__()
        self.enhance_deep = BasicConv2d(channels, channels, 3, padding=1)
        self.fuse3 = FuseStep(channels)
        self.fuse2 = FuseStep(channels)
        self.fuse1 = FuseStep(channels)
        self.head = nn.Conv2d(channels, 1, 1)

    def forward(self, feats) -> torch.Tensor:
        p1, p2, p3, p4 = feats
        d4 = self.enhance_deep(p4)
        d3 = self.fuse3(p3, d4, p4)
        d2 = self.fuse2(p2, d3, p3)
        d1 = self.fuse1(p1, d2, p2)
        return self.head(d1)


class PlainDecoder(nn.Module):
    """Baseline: upsample all levels to the shallowest scale, concat, fuse."""

    def __init__(self, channels: int):
        super().__init__()
        self.fuse = BasicConv2d(4 * channels, channels, 3, padding=1)
        self.head = nn.Conv2d(channels, 1, 1)

    def forward(self, feats) -> torch.Tensor:
        p1 = feats[0]
        stacked = torch.cat([p1] + [_upsample_to(f, p1) for f in feats[1:]], dim=1)
        return self.head(self.fuse(stacked))


def decode_rough(decoder: nn.Module, feats) -> RoughPrediction:
    """Run a decoder and upsample its stride-4 logits to input resolution."""
    logits = F.interpolate(decoder(feats), scale_factor=4,
                           mode="bilinear", align_corners=False)
    return RoughPrediction(m1_logits=logits, m1_prob=torch.sigmoid(logits))


def derive_position_prior(rough: RoughPrediction) -> torch.Tensor:
    """Position prior: sigmoid of the rough logits, values in (0, 1)."""
    return torch.sigmoid(rough.m1_logits)


def boundary_from_position(position: torch.Tensor) -> torch.Tensor:
    """Boundary prior: |Laplacian| of the position prior, reflect-padded.

    The kernel is a constant, so no parameters are trained here; gradients
    still flow into the position map.
    """
    kernel = torch.tensor(LAPLACIAN_KERNEL, dtype=position.dtype,
                          device=position.device).view(1, 1, 3, 3)
    padded = F.pad(position, (1, 1, 1, 1), mode="reflect")
    return F.conv2d(padded, kernel).abs()


def derive_boundary_prior(rough: RoughPrediction) -> torch.Tensor:
    return boundary_from_position(derive_position_prior(rough))


def derive_priors(rough: RoughPrediction) -> PriorPair:
    position = derive_position_prior(rough)
    return PriorPair(position=position, boundary=boundary_from_position(position))
