"""Adaptive prior-guided refinement blocks.

Each pyramid level receives one prior: position priors modulate
high-level features through combined channel/spatial attention, boundary
priors steer low-level features through a deformable convolution whose
offsets are predicted from the feature and the prior. The guided feature
is a learnable-weight residual: lambda * (f(x, prior) + x).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.ops import DeformConv2d

PRIOR_KINDS = ("position", "boundary")

DEFAULT_ROUTING = {1: "boundary", 2: "boundary", 3: "position", 4: "position"}


@dataclass(frozen=True)
class ApgConfig:
    # level -> prior kind; levels 1..4, shallow to deep
    routing: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_ROUTING))
    lambda_init: float = 1.0

    def __post_init__(self) -> None:
        if set(self.routing.keys()) != {1, 2, 3, 4}:
            raise ValueError(f"routing must cover levels 1..4, got {sorted(self.routing)}")
        bad = {k for k in self.routing.values() if k not in PRIOR_KINDS}
        if bad:
            raise ValueError(f"unknown prior kinds in routing: {sorted(bad)}")


@dataclass
class RefinedPrediction:
    m2_logits: torch.Tensor  # (B, 1, H, W)
    m2_prob: torch.Tensor


def _resize_prior(prior: torch.Tensor, feature: torch.Tensor) -> torch.Tensor:
    if prior.shape[-2:] == feature.shape[-2:]:
        return prior
    return F.interpolate(prior, size=feature.shape[-2:], mode="bilinear",
                         align_corners=False)


class CombinedAttention(nn.Module):
    """Channel gate from a pooled descriptor, then a spatial gate from
    feature statistics concatenated with the resized prior."""

    def __init__(self, channels: int, reduction: int = 4, spatial_kernel: int = 7):
        super().__init__()
        mid = max(channels // reduction, 1)
        self.channel_gate = nn.Sequential(
            nn.Conv2d(channels, mid, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(mid, channels, 1),
        )
        self.spatial_gate = nn.Conv2d(3, 1, spatial_kernel, padding=spatial_kernel // 2)

    def forward(self, feature: torch.Tensor, prior: torch.Tensor) -> torch.Tensor:
        pooled = F.adaptive_avg_pool2d(feature, 1)
        gate_c = torch.sigmoid(self.channel_gate(pooled))
        refined = feature * gate_c
        stats = torch.cat([
            refined.mean(dim=1, keepdim=True),
            refined.amax(dim=1, keepdim=True),
            _resize_prior(prior, feature),
        ], dim=1)
        gate_s = torch.sigmoid(self.spatial_gate(stats))
        return refined * gate_s


class DeformableRefine(nn.Module):
    """3x3 deformable convolution with offsets predicted from the feature
    and the resized prior. Offsets start at zero, so the block begins as a
    standard convolution."""

    def __init__(self, channels: int, kernel_size: int = 3):
        super().__init__()
        self.offset_conv = nn.Conv2d(channels + 1, 2 * kernel_size * kernel_size,
                                     3, padding=1)
        nn.init.zeros_(self.offset_conv.weight)
        nn.init.zeros_(self.offset_conv.bias)
        self.deform = DeformConv2d(channels, channels, kernel_size,
                                   padding=kernel_size // 2)

    def forward(self, feature: torch.Tensor, prior: torch.Tensor) -> torch.Tensor:
        offsets = self.offset_conv(
            torch.cat([feature, _resize_prior(prior, feature)], dim=1))
        # NaN offsets would index out of bounds inside the sampling kernel
        if not torch.isfinite(offsets).all():
            raise RuntimeError("non-finite offsets in deformable refinement")
        return self.deform(feature, offsets)


class PriorGuidedBlock(nn.Module):
    """guided = lambda * (f(feature, prior) + feature); f depends on the kind."""

    def __init__(self, channels: int, kind: str, lambda_init: float = 1.0):
        super().__init__()
        if kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {kind!r}")
        self.kind = kind
        self.transform = (CombinedAttention(channels) if kind == "position"
                          else DeformableRefine(channels))
        self.fusion_weight = nn.Parameter(torch.tensor(float(lambda_init)))

    def forward(self, feature: torch.Tensor, prior: torch.Tensor,
                kind: str | None = None) -> torch.Tensor:
        if kind is not None and kind != self.kind:
            raise ValueError(
                f"prior kind {kind!r} does not match this block's routing {self.kind!r}"
            )
        return self.fusion_weight * (self.transform(feature, prior) + feature)


class PriorGuidedStage(nn.Module):
    """Applies the routed prior-guided block to each of the four levels."""

    def __init__(self, channels: int, config: ApgConfig | None = None):
        super().__init__()
        if config is None:
            config = ApgConfig()
        self.routing = dict(config.routing)
        self.blocks = nn.ModuleDict({
            str(level): PriorGuidedBlock(channels, kind, config.lambda_init)
            for level, kind in sorted(self.routing.items())
        })

    def fusion_weights(self) -> dict[int, torch.Tensor]:
        return {int(level): block.fusion_weight for level, block in self.blocks.items()}

    def forward(self, feats, position: torch.Tensor, boundary: torch.Tensor):
        priors = {"position": position, "boundary": boundary}
        return tuple(
            self.blocks[str(level)](feat, priors[self.routing[level]])
            for level, feat in enumerate(feats, start=1)
        )
