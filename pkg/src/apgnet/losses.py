"""Hybrid segmentation loss and the Siamese training step.

Both maps (rough and refined) of both branches are supervised with a
boundary-weighted BCE + weighted IoU loss; a mean-squared alignment loss
ties the refined probabilities of the two weight-shared branches
together. The trainer runs the same parameter set on the original and the
enhanced batch, so it adds no parameters over a single-branch model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .data import Batch
from .model import APGNet, PredictionSet

TRAINING_MODES = ("siamese", "single", "augment_mix")


@dataclass
class LossReport:
    l_seg: float
    l_align: float
    l_total: float
    terms: dict[str, float] = field(default_factory=dict)


def pixel_weight_map(mask: torch.Tensor) -> torch.Tensor:
    """Structure-aware pixel weights: 1 + 5 |avgpool_31(mask) - mask|.

    The pool excludes padding from its mean, so constant masks map to
    constant weight 1; values lie in [1, 6].
    """
    pooled = F.avg_pool2d(mask, kernel_size=31, stride=1, padding=15,
                          count_include_pad=False)
    return 1.0 + 5.0 * (pooled - mask).abs()


def weighted_bce_iou(logits: torch.Tensor, mask: torch.Tensor,
                     weights: torch.Tensor) -> torch.Tensor:
    """Pixel-weighted BCE plus weighted IoU, averaged over the batch."""
    if logits.shape != mask.shape or logits.shape != weights.shape:
        raise ValueError(
            f"shape mismatch: logits {tuple(logits.shape)}, mask {tuple(mask.shape)}, "
            f"weights {tuple(weights.shape)}"
        )
    bce = F.binary_cross_entropy_with_logits(logits, mask, reduction="none")
    wbce = (weights * bce).sum(dim=(1, 2, 3)) / weights.sum(dim=(1, 2, 3))
    prob = torch.sigmoid(logits)
    inter = (weights * prob * mask).sum(dim=(1, 2, 3))
    union = (weights * (prob + mask - prob * mask)).sum(dim=(1, 2, 3))
    wiou = 1.0 - inter / union
    return (wbce + wiou).mean()


def alignment_loss(pred_a: torch.Tensor, pred_b: torch.Tensor) -> torch.Tensor:
    """Mean squared difference between two probability maps."""
    if pred_a.shape != pred_b.shape:
        raise ValueError(f"shape mismatch: {tuple(pred_a.shape)} vs {tuple(pred_b.shape)}")
    return ((pred_a - pred_b) ** 2).mean()


def _segmentation_terms(preds: PredictionSet, mask: torch.Tensor,
                        weights: torch.Tensor, tag: str) -> dict[str, torch.Tensor]:
    terms = {f"seg_m1_{tag}": weighted_bce_iou(preds.m1_logits, mask, weights)}
    if preds.refined is not None:
        terms[f"seg_m2_{tag}"] = weighted_bce_iou(preds.refined.m2_logits, mask, weights)
    return terms


class SiameseTrainer:
    """Owns one model + optimizer; each step() consumes a batch.

    mode "siamese" runs the weight-shared double forward with alignment;
    "single" trains on originals only; "augment_mix" trains single-branch
    but randomly swaps samples for their enhanced versions (p = 0.5).
    """

    def __init__(self, model: APGNet, lr: float = 8e-5, weight_decay: float = 0.1,
                 mode: str = "siamese", align_on_m1: bool = False, seed: int = 0):
        if mode not in TRAINING_MODES:
            raise ValueError(f"unknown training mode {mode!r}")
        self.model = model
        self.mode = mode
        self.align_on_m1 = align_on_m1
        self.optimizer = torch.optim.Adam(model.parameters(), lr=lr,
                                          weight_decay=weight_decay)
        self._mix_rng = np.random.RandomState(seed)

    def parameter_count(self) -> int:
        return self.model.parameter_count()

    def _losses(self, batch: Batch) -> dict[str, torch.Tensor]:
        weights = pixel_weight_map(batch.masks)
        if self.mode == "siamese":
            preds_orig = self.model(batch.originals)
            preds_enh = self.model(batch.enhanced)
            terms = _segmentation_terms(preds_orig, batch.masks, weights, "orig")
            terms.update(_segmentation_terms(preds_enh, batch.masks, weights, "enh"))
            terms["align"] = alignment_loss(preds_orig.final_prob, preds_enh.final_prob)
            if self.align_on_m1 and preds_orig.refined is not None:
                terms["align_m1"] = alignment_loss(preds_orig.m1_prob, preds_enh.m1_prob)
            return terms
        if self.mode == "augment_mix":
            swap = torch.from_numpy(self._mix_rng.rand(batch.originals.shape[0]) < 0.5)
            inputs = batch.originals.clone()
            inputs[swap] = batch.enhanced[swap]
        else:
            inputs = batch.originals
        return _segmentation_terms(self.model(inputs), batch.masks, weights, "orig")

    def step(self, batch: Batch) -> LossReport:
        self.model.train()
        for name in ("originals", "enhanced", "masks"):
            if not torch.isfinite(getattr(batch, name)).all():
                raise RuntimeError(f"non-finite values in batch {name}")
        terms = self._losses(batch)
        for name, value in terms.items():
            if not torch.isfinite(value):
                raise RuntimeError(f"non-finite loss term {name!r}: {value.item()!r}")
        l_align = sum(v for k, v in terms.items() if k.startswith("align"))
        l_seg = sum(v for k, v in terms.items() if k.startswith("seg"))
        if not torch.is_tensor(l_align):
            l_align = torch.zeros((), dtype=l_seg.dtype)
        l_total = l_seg + l_align
        self.optimizer.zero_grad()
        l_total.backward()
        self.optimizer.step()
        seg = float(l_seg.item())
        align = float(l_align.item())
        return LossReport(
            l_seg=seg,
            l_align=align,
            l_total=seg + align,  # the reported total is exactly the reported sum
            terms={k: float(v.item()) for k, v in terms.items()},
        )

    @torch.no_grad()
    def evaluate_losses(self, batch: Batch) -> LossReport:
        """Loss terms on a batch without an update, in training mode."""
        self.model.train()
        terms = self._losses(batch)
        l_align = sum(v for k, v in terms.items() if k.startswith("align"))
        l_seg = sum(v for k, v in terms.items() if k.startswith("seg"))
        if not torch.is_tensor(l_align):
            l_align = torch.zeros(())
        seg = float(l_seg.item())
        align = float(l_align.item())
        return LossReport(
            l_seg=seg,
            l_align=align,
            l_total=seg + align,
            terms={k: float(v.item()) for k, v in terms.items()},
        )
