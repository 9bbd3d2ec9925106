"""Multi-Scale Retinex with Color Restoration (MSRCR).

Log-domain illumination/reflectance decomposition at several Gaussian
surround scales, times a per-channel color-restoration gain. Used as the
augmentation transform that produces the second Siamese branch input.

Images are H x W x 3 float arrays in [0, 1]; all functions here are pure
and safe to call from multiple workers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Classic surround scales (pixels) with equal weights.
DEFAULT_SCALES = (15.0, 80.0, 250.0)

# Kernel support ends at 3 sigma.
_TRUNCATE = 3.0


@dataclass(frozen=True)
class MsrcrConfig:
    """Parameters of the enhancement transform.

    scales / scale_weights define the Gaussian surround bank, the
    restoration_* pair the color-restoration gain, gain/offset the final
    affine map applied before per-image min-max normalization.
    """

    scales: tuple[float, ...] = DEFAULT_SCALES
    scale_weights: tuple[float, ...] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    restoration_alpha: float = 125.0
    restoration_beta: float = 46.0
    output_gain: float = 1.0
    output_offset: float = 0.0
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if len(self.scales) != len(self.scale_weights) or len(self.scales) < 1:
            raise ValueError(
                "scales and scale_weights must have equal length >= 1, got "
                f"{len(self.scales)} and {len(self.scale_weights)}"
            )
        if any(s <= 0 for s in self.scales):
            raise ValueError(f"all scales must be positive, got {self.scales}")
        if abs(sum(self.scale_weights) - 1.0) > 1e-9:
            raise ValueError(
                f"scale_weights must sum to 1, got sum {sum(self.scale_weights)!r}"
            )
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def cache_key(self) -> str:
        """Stable digest of the configuration, used for on-disk caches."""
        payload = json.dumps(
            {
                "scales": list(self.scales),
                "weights": list(self.scale_weights),
                "alpha": self.restoration_alpha,
                "beta": self.restoration_beta,
                "gain": self.output_gain,
                "offset": self.output_offset,
                "epsilon": self.epsilon,
            },
            sort_keys=True,
        )
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()


def _validate_rgb(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return image.astype(np.float64)


def gaussian_surround(image: np.ndarray, sigma: float) -> np.ndarray:
    """Blur a single-channel map with a normalized Gaussian surround.

    The kernel is truncated at 3 sigma and the borders reflect-padded
    (edge-inclusive), so constants are preserved exactly.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    return ndimage.gaussian_filter(image, sigma, mode="reflect", truncate=_TRUNCATE)


def msrcr(image: np.ndarray, config: MsrcrConfig | None = None) -> np.ndarray:
    """Enhance an RGB image, returning an H x W x 3 array in [0, 1].

    Per channel: the weighted multi-scale log ratio of the pixel against its
    Gaussian surrounds, multiplied by the color-restoration gain
    beta * (log(alpha * I_c + eps) - log(sum_c I_c + eps)), then gain/offset
    and per-image min-max normalization with clipping. If normalization is
    degenerate (flat response) the constant 0.5 image is returned.
    """
    if config is None:
        config = MsrcrConfig()
    img = _validate_rgb(image)
    eps = config.epsilon

    log_img = np.log(img + eps)
    retinex = np.zeros_like(img)
    for weight, sigma in zip(config.scale_weights, config.scales):
        for c in range(3):
            blurred = gaussian_surround(img[:, :, c], sigma)
            retinex[:, :, c] += weight * (log_img[:, :, c] - np.log(blurred + eps))

    channel_sum = img.sum(axis=2, keepdims=True)
    restoration = config.restoration_beta * (
        np.log(config.restoration_alpha * img + eps) - np.log(channel_sum + eps)
    )

    out = config.output_gain * retinex * restoration + config.output_offset

    vmin = out.min()
    vmax = out.max()
    if vmax - vmin <= 1e-12:
        return np.full_like(img, 0.5)
    return np.clip((out - vmin) / (vmax - vmin), 0.0, 1.0)
