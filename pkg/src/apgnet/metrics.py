"""Evaluation metrics for binary segmentation maps.

Implements the five scores reported by the evaluation suite: mean
intersection-over-union, structure measure, weighted F-measure,
enhanced-alignment measure, and mean absolute error. Predictions are
continuous maps in [0, 1]; ground truths are binary. All computation is
float64 numpy; every function is pure.

Conventions that the canonical metric definitions leave open are pinned
here so results are reproducible:
  * the structure measure splits regions at round(centroid) + 1 with
    numpy (banker's) rounding, quadrant weights proportional to areas;
  * the enhanced-alignment score is normalized by the pixel count, which
    keeps it in [0, 1] including the degenerate all-ones case;
  * the weighted F-measure resolves nearest-foreground ties toward the
    smallest row, then column.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, asdict
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

_EPS = float(np.spacing(1))

REPORT_FIELDS = ("miou", "s_alpha", "f_beta_w", "e_phi", "mae")


@dataclass(frozen=True)
class MetricConfig:
    """Knobs of the metric suite."""

    alpha: float = 0.5          # object/region balance of the structure measure
    beta_sq: float = 1.0        # precision/recall balance of the weighted F
    iou_threshold: float = 0.5  # binarization threshold for IoU
    e_mode: str = "adaptive"    # "adaptive" (2 x mean) or "sweep" (256-level mean)

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta_sq <= 0:
            raise ValueError(f"beta_sq must be positive, got {self.beta_sq}")
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError(f"iou_threshold must lie in (0, 1), got {self.iou_threshold}")
        if self.e_mode not in ("adaptive", "sweep"):
            raise ValueError(f"e_mode must be 'adaptive' or 'sweep', got {self.e_mode!r}")


@dataclass
class MetricReport:
    """Dataset-level averages of the five scores."""

    miou: float
    s_alpha: float
    f_beta_w: float
    e_phi: float
    mae: float
    n_images: int

    def to_dict(self) -> dict:
        return asdict(self)

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(REPORT_FIELDS) + ["n_images"])
            writer.writeheader()
            writer.writerow(self.to_dict())


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    return pred, gt


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute error between a prediction and a binary ground truth."""
    pred, gt = _check_pair(pred, gt)
    return float(np.abs(pred - gt).mean())


def miou(pred: np.ndarray, gt: np.ndarray, threshold: float = 0.5) -> float:
    """IoU of the thresholded prediction against the ground truth.

    Defined as 1 when both sets are empty. The dataset-level mIoU is the
    mean of this value over images (see evaluate_dataset).
    """
    pred, gt = _check_pair(pred, gt)
    p = pred > threshold
    g = gt > 0.5
    union = np.logical_or(p, g).sum()
    if union == 0:
        return 1.0
    inter = np.logical_and(p, g).sum()
    return float(inter / union)


# ---------------------------------------------------------------------------
# structure measure
# ---------------------------------------------------------------------------

def _object_score(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    m = float(values.mean())
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * m / (m * m + 1.0 + sd + _EPS)


def _s_object(pred: np.ndarray, gt: np.ndarray) -> float:
    fg = gt > 0.5
    u = float(gt.mean())
    score_fg = _object_score(pred[fg])
    score_bg = _object_score((1.0 - pred)[~fg])
    return u * score_fg + (1.0 - u) * score_bg


def _region_ssim(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    if n == 0:
        return 0.0  # weight is zero for empty quadrants
    mp = float(p.mean())
    mg = float(g.mean())
    if n > 1:
        var_p = float(((p - mp) ** 2).sum() / (n - 1))
        var_g = float(((g - mg) ** 2).sum() / (n - 1))
        cov = float(((p - mp) * (g - mg)).sum() / (n - 1))
    else:
        var_p = var_g = cov = 0.0
    num = 4.0 * mp * mg * cov
    den = (mp * mp + mg * mg) * (var_p + var_g)
    if num != 0.0:
        return num / (den + _EPS)
    if den == 0.0:
        return 1.0
    return 0.0


def _split_point(gt: np.ndarray) -> tuple[int, int]:
    h, w = gt.shape
    fg = np.argwhere(gt > 0.5)
    if fg.size == 0:
        return int(round(w / 2)), int(round(h / 2))
    cy, cx = np.round(fg.mean(axis=0))
    return int(cx) + 1, int(cy) + 1


def _s_region(pred: np.ndarray, gt: np.ndarray) -> float:
    h, w = gt.shape
    x, y = _split_point(gt)
    area = h * w
    weights = (
        x * y / area,
        y * (w - x) / area,
        (h - y) * x / area,
        (h - y) * (w - x) / area,
    )
    quads = ((slice(0, y), slice(0, x)), (slice(0, y), slice(x, w)),
             (slice(y, h), slice(0, x)), (slice(y, h), slice(x, w)))
    score = 0.0
    for wt, (rs, cs) in zip(weights, quads):
        score += wt * _region_ssim(pred[rs, cs], gt[rs, cs])
    return score


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Structure measure: alpha-weighted object and region similarity.

    Degenerate ground truths use the reference fallbacks: all-background
    scores 1 - mean(pred), all-foreground scores mean(pred).
    """
    pred, gt = _check_pair(pred, gt)
    y = float(gt.mean())
    if y == 0.0:
        return float(1.0 - pred.mean())
    if y == 1.0:
        return float(pred.mean())
    score = alpha * _s_object(pred, gt) + (1.0 - alpha) * _s_region(pred, gt)
    return float(max(score, 0.0))


# ---------------------------------------------------------------------------
# enhanced-alignment measure
# ---------------------------------------------------------------------------

def _e_binary(pred_bin: np.ndarray, gt_bin: np.ndarray) -> float:
    if not gt_bin.any():
        enhanced = 1.0 - pred_bin.astype(np.float64)
    elif gt_bin.all():
        enhanced = pred_bin.astype(np.float64)
    else:
        f = pred_bin.astype(np.float64)
        g = gt_bin.astype(np.float64)
        df = f - f.mean()
        dg = g - g.mean()
        align = 2.0 * dg * df / (dg * dg + df * df + _EPS)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(enhanced.mean())


def e_measure(pred: np.ndarray, gt: np.ndarray, mode: str = "adaptive") -> float:
    """Enhanced-alignment measure of a prediction against a binary mask.

    mode="adaptive" binarizes at min(2 x mean(pred), 1); mode="sweep"
    averages the score over 256 evenly spaced thresholds.
    """
    pred, gt = _check_pair(pred, gt)
    gt_bin = gt > 0.5
    if mode == "adaptive":
        th = min(2.0 * float(pred.mean()), 1.0)
        return _e_binary(pred >= th, gt_bin)
    if mode == "sweep":
        scores = [_e_binary(pred >= t, gt_bin) for t in np.arange(256) / 255.0]
        return float(np.mean(scores))
    raise ValueError(f"unknown e_measure mode {mode!r}")


# ---------------------------------------------------------------------------
# weighted F-measure
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _ring_offsets(sq_dist: int) -> tuple[tuple[int, int], ...]:
    """Integer offsets (dy, dx) with dy^2 + dx^2 == sq_dist, row-major order."""
    offsets = []
    r = math.isqrt(sq_dist)
    for dy in range(-r, r + 1):
        rem = sq_dist - dy * dy
        dx = math.isqrt(rem)
        if dx * dx != rem:
            continue
        if dx == 0:
            offsets.append((dy, 0))
        else:
            offsets.append((dy, -dx))
            offsets.append((dy, dx))
    return tuple(sorted(offsets))


def _nearest_foreground(fg: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel distance to the nearest foreground pixel and its coords.

    Ties are resolved toward the smallest row, then the smallest column,
    so downstream error propagation is reproducible.
    """
    h, w = fg.shape
    _, (iy, ix) = ndimage.distance_transform_edt(~fg, return_indices=True)
    yy, xx = np.mgrid[0:h, 0:w]
    sq = (yy - iy) ** 2 + (xx - ix) ** 2  # exact integer squared distances
    near_y = iy.copy()
    near_x = ix.copy()
    bg = ~fg
    for s in np.unique(sq[bg]):
        if s == 0:
            continue
        unresolved = bg & (sq == s)
        for dy, dx in _ring_offsets(int(s)):
            if not unresolved.any():
                break
            hit = np.zeros_like(unresolved)
            ys, ye = max(0, -dy), min(h, h - dy)
            xs, xe = max(0, -dx), min(w, w - dx)
            if ys < ye and xs < xe:
                hit[ys:ye, xs:xe] = fg[ys + dy:ye + dy, xs + dx:xe + dx]
            hit &= unresolved
            near_y[hit] = yy[hit] + dy
            near_x[hit] = xx[hit] + dx
            unresolved &= ~hit
    return np.sqrt(sq.astype(np.float64)), near_y, near_x


def _dependency_kernel(size: int = 7, sigma: float = 5.0) -> np.ndarray:
    ax = np.arange(size) - size // 2
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return k / k.sum()


def weighted_f_measure(pred: np.ndarray, gt: np.ndarray, beta_sq: float = 1.0) -> float:
    """Dependency-weighted F-measure of a continuous prediction.

    Errors at background pixels inherit the error of their nearest
    foreground pixel before Gaussian smoothing; background importance
    decays with distance to the foreground. An empty ground truth is
    defined as 0 and raises a warning.
    """
    pred, gt = _check_pair(pred, gt)
    fg = gt > 0.5
    if not fg.any():
        warnings.warn("weighted_f_measure: empty ground truth, score defined as 0")
        return 0.0

    err = np.abs(pred - fg.astype(np.float64))
    dist, near_y, near_x = _nearest_foreground(fg)

    err_t = err.copy()
    bg = ~fg
    err_t[bg] = err[near_y[bg], near_x[bg]]

    smoothed = ndimage.correlate(err_t, _dependency_kernel(), mode="constant", cval=0.0)
    min_err = err.copy()
    take = fg & (smoothed < err)
    min_err[take] = smoothed[take]

    importance = np.ones_like(err)
    importance[bg] = 2.0 - np.exp(math.log(0.5) / 5.0 * dist[bg])
    weighted_err = min_err * importance

    n_fg = float(fg.sum())
    tp_w = n_fg - float(weighted_err[fg].sum())
    fp_w = float(weighted_err[bg].sum())
    recall = 1.0 - float(weighted_err[fg].mean())
    precision = tp_w / (_EPS + tp_w + fp_w)
    return float(
        (1.0 + beta_sq) * precision * recall / (_EPS + recall + beta_sq * precision)
    )


# ---------------------------------------------------------------------------
# dataset evaluation
# ---------------------------------------------------------------------------

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def _list_maps(directory: Path) -> dict[str, Path]:
    files = {}
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() in _IMAGE_SUFFIXES:
            files[path.stem] = path
    return files


def load_gray(path: str | Path) -> np.ndarray:
    """Load a map as a float64 grayscale array in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def score_pair(pred: np.ndarray, gt: np.ndarray, config: MetricConfig) -> dict[str, float]:
    """All five metrics for one prediction/ground-truth pair.

    Scoring happens at ground-truth resolution; the prediction is resized
    first if the shapes differ.
    """
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != gt.shape:
        resized = Image.fromarray((np.clip(pred, 0, 1) * 255).astype(np.uint8)).resize(
            (gt.shape[1], gt.shape[0]), Image.BILINEAR
        )
        pred = np.asarray(resized, dtype=np.float64) / 255.0
    assert pred.shape == gt.shape
    return {
        "miou": miou(pred, gt, config.iou_threshold),
        "s_alpha": s_measure(pred, gt, config.alpha),
        "f_beta_w": weighted_f_measure(pred, gt, config.beta_sq),
        "e_phi": e_measure(pred, gt, config.e_mode),
        "mae": mae(pred, gt),
    }


def evaluate_dataset(
    pred_dir: str | Path,
    gt_dir: str | Path,
    config: MetricConfig | None = None,
) -> MetricReport:
    """Average the five metrics over matching files of two directories.

    Files are matched by stem; a ground truth without a prediction (or an
    empty directory) is an error naming the missing file.
    """
    if config is None:
        config = MetricConfig()
    preds = _list_maps(Path(pred_dir))
    gts = _list_maps(Path(gt_dir))
    if not gts:
        raise FileNotFoundError(f"no ground-truth maps found in {gt_dir}")
    totals = {name: 0.0 for name in REPORT_FIELDS}
    for stem, gt_path in gts.items():
        if stem not in preds:
            raise FileNotFoundError(
                f"no prediction for ground truth {gt_path.name!r} in {pred_dir}"
            )
        scores = score_pair(load_gray(preds[stem]), load_gray(gt_path) > 0.5, config)
        for name in REPORT_FIELDS:
            totals[name] += scores[name]
    n = len(gts)
    return MetricReport(
        miou=totals["miou"] / n,
        s_alpha=totals["s_alpha"] / n,
        f_beta_w=totals["f_beta_w"] / n,
        e_phi=totals["e_phi"] / n,
        mae=totals["mae"] / n,
        n_images=n,
    )
