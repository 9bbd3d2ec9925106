"""The two-stage prior-guided segmentation network.

Stage one extracts a rough map from extended-receptive-field features via
a progressive decoder; stage two injects position/boundary priors derived
from the rough map into the features and decodes them again with
independent weights. Ablation variants drop the refinement stage and/or
swap the progressive decoder for a plain one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .apg import ApgConfig, PriorGuidedStage, RefinedPrediction
from .backbone import BackboneConfig, build_backbone
from .erf import ErfConfig, ExtendedReceptiveField
from .mpd import (
    PlainDecoder,
    PriorPair,
    ProgressiveDecoder,
    RoughPrediction,
    decode_rough,
    derive_priors,
)


@dataclass(frozen=True)
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    erf: ErfConfig = field(default_factory=ErfConfig)
    apg: ApgConfig = field(default_factory=ApgConfig)
    use_mpd: bool = True   # False -> plain upsample-concat decoding
    use_apg: bool = True   # False -> no refinement stage, M2 == M1


@dataclass
class PredictionSet:
    """Rough and refined maps at input resolution; priors when refined."""

    rough: RoughPrediction
    refined: RefinedPrediction | None = None
    priors: PriorPair | None = None

    @property
    def m1_logits(self) -> torch.Tensor:
        return self.rough.m1_logits

    @property
    def m1_prob(self) -> torch.Tensor:
        return self.rough.m1_prob

    @property
    def final_logits(self) -> torch.Tensor:
        return self.refined.m2_logits if self.refined is not None else self.rough.m1_logits

    @property
    def final_prob(self) -> torch.Tensor:
        return self.refined.m2_prob if self.refined is not None else self.rough.m1_prob


class APGNet(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        if config is None:
            config = ModelConfig()
        self.config = config
        self.backbone = build_backbone(config.backbone)
        channels = config.erf.out_channels
        self.erf = nn.ModuleList([
            ExtendedReceptiveField(c, config.erf) for c in config.backbone.channels
        ])
        self.rough_decoder = (ProgressiveDecoder(channels) if config.use_mpd
                              else PlainDecoder(channels))
        if config.use_apg:
            self.guided_stage = PriorGuidedStage(channels, config.apg)
            self.refine_decoder = ProgressiveDecoder(channels)
        else:
            self.guided_stage = None
            self.refine_decoder = None

    def forward(self, images: torch.Tensor) -> PredictionSet:
        pyramid = self.backbone(images)
        feats = tuple(erf(f) for erf, f in zip(self.erf, pyramid))
        rough = decode_rough(self.rough_decoder, feats)
        if self.guided_stage is None:
            return PredictionSet(rough=rough)
        priors = derive_priors(rough)
        guided = self.guided_stage(feats, priors.position, priors.boundary)
        m2_logits = F.interpolate(self.refine_decoder(guided), scale_factor=4,
                                  mode="bilinear", align_corners=False)
        refined = RefinedPrediction(m2_logits=m2_logits,
                                    m2_prob=torch.sigmoid(m2_logits))
        return PredictionSet(rough=rough, refined=refined, priors=priors)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
