"""Extended receptive field module.

Parallel branches of 1x1 reduction, asymmetric 1xk/kx1 pairs and dilated
3x3 convolutions are concatenated and fused, widening the receptive field
while unifying all pyramid levels to a common channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .layers import BasicConv2d


@dataclass(frozen=True)
class ErfConfig:
    out_channels: int = 64
    dilations: tuple[int, ...] = (1, 3, 5, 7)
    asym_kernel: int = 3

    def __post_init__(self) -> None:
        if self.out_channels < 1:
            raise ValueError(f"out_channels must be >= 1, got {self.out_channels}")
        if len(set(self.dilations)) != len(self.dilations) or any(d < 1 for d in self.dilations):
            raise ValueError(f"dilations must be distinct and >= 1, got {self.dilations}")
        if self.asym_kernel < 3 or self.asym_kernel % 2 == 0:
            raise ValueError(f"asym_kernel must be an odd int >= 3, got {self.asym_kernel}")


class ExtendedReceptiveField(nn.Module):
    """One branch per dilation: reduce -> 1xk -> kx1 -> dilated 3x3; then fuse."""

    def __init__(self, in_channels: int, config: ErfConfig | None = None):
        super().__init__()
        if config is None:
            config = ErfConfig()
        self.config = config
        out = config.out_channels
        k = config.asym_kernel
        width = max(out // len(config.dilations), 1)
        self.branches = nn.ModuleList()
        for d in config.dilations:
            self.branches.append(nn.Sequential(
                BasicConv2d(in_channels, width, 1),
                BasicConv2d(width, width, (1, k), padding=(0, k // 2)),
                BasicConv2d(width, width, (k, 1), padding=(k // 2, 0)),
                BasicConv2d(width, width, 3, padding=d, dilation=d),
            ))
        self.fuse = nn.Sequential(
            BasicConv2d(width * len(config.dilations), out, 1),
            BasicConv2d(out, out, 3, padding=1, relu=False),
        )
        self.shortcut = BasicConv2d(in_channels, out, 1, relu=False)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        fused = self.fuse(torch.cat([branch(x) for branch in self.branches], dim=1))
        return self.relu(fused + self.shortcut(x))
