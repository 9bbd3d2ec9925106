"""Synthetic camouflage fixtures for CPU-only tests and the desk profile.

Each fixture is a textured low-contrast scene with one ellipse- or
worm-shaped foreground whose appearance blends into the background; the
mask is exact. Generation is fully determined by the seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


def _texture(rng: np.random.RandomState, size: int) -> np.ndarray:
    base = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=size / 16)
    detail = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=1.5)
    base /= base.std() + 1e-8
    detail /= detail.std() + 1e-8
    return 0.75 * base + 0.25 * detail


def _ellipse_mask(rng: np.random.RandomState, size: int) -> np.ndarray:
    cy, cx = rng.uniform(0.35, 0.65, size=2) * size
    ry = rng.uniform(0.14, 0.26) * size
    rx = rng.uniform(0.14, 0.26) * size
    theta = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    yr = (yy - cy) * np.cos(theta) - (xx - cx) * np.sin(theta)
    xr = (yy - cy) * np.sin(theta) + (xx - cx) * np.cos(theta)
    return ((yr / ry) ** 2 + (xr / rx) ** 2 <= 1.0)


def _worm_mask(rng: np.random.RandomState, size: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    y, x = rng.uniform(0.3, 0.7, size=2) * size
    heading = rng.uniform(0, 2 * np.pi)
    radius = max(size // 20, 3)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(24):
        heading += rng.uniform(-0.6, 0.6)
        y = np.clip(y + np.sin(heading) * size / 24, radius, size - radius - 1)
        x = np.clip(x + np.cos(heading) * size / 24, radius, size - radius - 1)
        mask |= (yy - y) ** 2 + (xx - x) ** 2 <= radius ** 2
    return mask


def render_fixture(rng: np.random.RandomState, size: int) -> tuple[np.ndarray, np.ndarray]:
    """One synthetic scene: (H x W x 3 float image in [0, 1], binary mask)."""
    bg_tex = _texture(rng, size)
    fg_tex = _texture(rng, size)
    tint = np.array([0.45, 0.75, 0.95]) * rng.uniform(0.85, 1.15, size=3)
    mask = _ellipse_mask(rng, size) if rng.rand() < 0.5 else _worm_mask(rng, size)

    luma_bg = 0.45 + 0.13 * bg_tex
    # foreground keeps most of the local background texture: low contrast
    luma_fg = 0.45 + 0.13 * (0.6 * bg_tex + 0.4 * fg_tex) + rng.uniform(0.05, 0.1)
    luma = np.where(mask, luma_fg, luma_bg)
    image = np.clip(luma[:, :, None] * tint[None, None, :], 0.0, 1.0)
    return image.astype(np.float32), mask.astype(np.float32)


def generate_fixtures(out_dir: str | Path, count: int, seed: int, size: int = 128,
                      test_count: int | None = None, image_subdir: str = "Image",
                      mask_subdir: str = "GT") -> dict[str, int]:
    """Write a train/test fixture tree of PNG images and {0, 255} masks."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    out_dir = Path(out_dir)
    if test_count is None:
        test_count = max(2, count // 2)
    counts = {"train": count, "test": test_count}
    for split_index, (split, n) in enumerate(counts.items()):
        rng = np.random.RandomState(seed + 1000 * split_index)
        image_dir = out_dir / split / image_subdir
        mask_dir = out_dir / split / mask_subdir
        image_dir.mkdir(parents=True, exist_ok=True)
        mask_dir.mkdir(parents=True, exist_ok=True)
        for k in range(n):
            image, mask = render_fixture(rng, size)
            name = f"fix_{k:03d}.png"
            Image.fromarray((image * 255).round().astype(np.uint8)).save(image_dir / name)
            Image.fromarray((mask * 255).astype(np.uint8)).save(mask_dir / name)
    return counts
