"""Dataset indexing, loading, and Siamese batch assembly.

Expects trees of the form root/{train,test}/Image + GT (or a single
Image/GT pair treated as the train split). Images are bilinearly resized
and scaled to [0, 1]; masks are bilinearly resized then binarized at 0.5.
The enhanced branch of a batch is the MSRCR transform of the original,
optionally cached on disk keyed by (path, size, config hash).
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .msrcr import MsrcrConfig, msrcr

SPLITS = ("train", "test")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class SampleRecord:
    image_path: Path
    mask_path: Path
    split: str


@dataclass
class Batch:
    originals: torch.Tensor  # (B, 3, H, W) float32 in [0, 1]
    enhanced: torch.Tensor   # (B, 3, H, W) float32 in [0, 1]
    masks: torch.Tensor      # (B, 1, H, W) float32, values {0, 1}


def _find_mask(mask_dir: Path, stem: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        candidate = mask_dir / (stem + suffix)
        if candidate.exists():
            return candidate
    return None


def _index_split(image_dir: Path, mask_dir: Path, split: str) -> list[SampleRecord]:
    records = []
    for image_path in sorted(image_dir.iterdir()):
        if image_path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        mask_path = _find_mask(mask_dir, image_path.stem)
        if mask_path is None:
            raise FileNotFoundError(
                f"image {image_path.name!r} in {image_dir} has no matching mask in {mask_dir}"
            )
        records.append(SampleRecord(image_path=image_path, mask_path=mask_path, split=split))
    return records


def index_dataset(root: str | Path, image_subdir: str = "Image",
                  mask_subdir: str = "GT") -> list[SampleRecord]:
    """Deterministic, lexicographically sorted records for a dataset tree."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    records: list[SampleRecord] = []
    split_dirs = [(s, root / s / image_subdir, root / s / mask_subdir)
                  for s in SPLITS if (root / s / image_subdir).is_dir()]
    if split_dirs:
        for split, image_dir, mask_dir in split_dirs:
            records.extend(_index_split(image_dir, mask_dir, split))
    elif (root / image_subdir).is_dir():
        records.extend(_index_split(root / image_subdir, root / mask_subdir, "train"))
    else:
        raise FileNotFoundError(
            f"{root} contains neither <split>/{image_subdir} nor {image_subdir}"
        )
    if not records:
        raise FileNotFoundError(f"dataset root {root} contains no images")
    return records


def load_sample(record: SampleRecord, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Load one (image, mask) pair resized to size x size.

    Returns the image as H x W x 3 float32 in [0, 1] and the mask as
    H x W float32 with values in {0, 1}.
    """
    if size < 32:
        raise ValueError(f"size must be >= 32, got {size}")
    try:
        with Image.open(record.image_path) as im:
            image = im.convert("RGB").resize((size, size), Image.BILINEAR)
        with Image.open(record.mask_path) as im:
            mask = im.convert("L").resize((size, size), Image.BILINEAR)
    except OSError as exc:
        raise OSError(f"failed to read sample {record.image_path} / "
                      f"{record.mask_path}: {exc}") from exc
    image_arr = np.asarray(image, dtype=np.float32) / 255.0
    mask_arr = (np.asarray(mask, dtype=np.float32) / 255.0 >= 0.5).astype(np.float32)
    return image_arr, mask_arr


def _cached_enhance(image: np.ndarray, record: SampleRecord, size: int,
                    config: MsrcrConfig, cache_dir: Path | None) -> np.ndarray:
    if cache_dir is None:
        return msrcr(image, config).astype(np.float32)
    key = hashlib.sha1(
        f"{record.image_path.resolve()}|{size}|{config.cache_key()}".encode()
    ).hexdigest()
    cache_path = cache_dir / f"{key}.npy"
    if cache_path.exists():
        return np.load(cache_path)
    enhanced = msrcr(image, config).astype(np.float32)
    cache_dir.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".npy.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, enhanced)
        os.replace(tmp, cache_path)  # atomic on the same filesystem
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return enhanced


def make_batch(records: list[SampleRecord], msrcr_config: MsrcrConfig | None = None,
               size: int = 352, cache_dir: str | Path | None = None) -> Batch:
    """Stack records into a Siamese batch, preserving order."""
    if not records:
        raise ValueError("cannot build a batch from an empty record list")
    if msrcr_config is None:
        msrcr_config = MsrcrConfig()
    cache = Path(cache_dir) if cache_dir is not None else None
    originals, enhanced, masks = [], [], []
    for record in records:
        image, mask = load_sample(record, size)
        originals.append(image)
        enhanced.append(_cached_enhance(image, record, size, msrcr_config, cache))
        masks.append(mask)
    to_chw = lambda stack: torch.from_numpy(np.stack(stack)).permute(0, 3, 1, 2).contiguous()
    return Batch(
        originals=to_chw(originals),
        enhanced=to_chw(enhanced),
        masks=torch.from_numpy(np.stack(masks)).unsqueeze(1),
    )
