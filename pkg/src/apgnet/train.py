"""Experiment orchestration: training, evaluation, prediction, ablation.

A run is fully determined by its ExperimentConfig and seed; with
APGNET_DETERMINISTIC=1 torch is additionally forced onto deterministic
kernels. Checkpoints embed a config snapshot so every experiment can be
reconstructed from its artifact alone.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import ExperimentConfig, config_from_dict, config_to_dict
from .data import SampleRecord, index_dataset, make_batch
from .losses import SiameseTrainer
from .metrics import MetricConfig, MetricReport, evaluate_dataset
from .model import APGNet, ModelConfig

CHECKPOINT_FORMAT_VERSION = 1

DETERMINISM_ENV_VAR = "APGNET_DETERMINISTIC"

# ablation id -> (uses progressive decoder, uses refinement stage, trainer mode)
ABLATION_LADDER = {
    "M1": (False, False, "single"),
    "M2": (True, False, "single"),
    "M3": (True, True, "single"),
    "M4": (True, True, "augment_mix"),
    "M5": (True, True, "siamese"),
    "full": (True, True, "siamese"),
}


@dataclass
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    final_loss: float
    steps: int


def set_determinism(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if os.environ.get(DETERMINISM_ENV_VAR) == "1":
        torch.use_deterministic_algorithms(True)


def model_config_for(config: ExperimentConfig) -> ModelConfig:
    use_mpd, use_apg, _ = ABLATION_LADDER[config.ablation_id]
    return ModelConfig(backbone=config.model.backbone, erf=config.model.erf,
                       apg=config.model.apg, use_mpd=use_mpd, use_apg=use_apg)


def build_model(config: ExperimentConfig) -> APGNet:
    return APGNet(model_config_for(config))


def save_checkpoint(path: str | Path, model: APGNet, optimizer: torch.optim.Optimizer,
                    config: ExperimentConfig, epoch: int, step: int) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict(),
        "epoch": epoch,
        "step": step,
        "config": config_to_dict(config),
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(
            f"checkpoint {path} has format_version {version!r}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}"
        )
    return payload


def restore_model(payload: dict) -> tuple[APGNet, ExperimentConfig]:
    config = config_from_dict(payload["config"])
    model = build_model(config)
    model.load_state_dict(payload["model_state"])
    return model, config


def _train_records(config: ExperimentConfig) -> list[SampleRecord]:
    if config.data.root is None:
        raise ValueError("config.data.root is not set")
    records = [r for r in index_dataset(config.data.root, config.data.image_subdir,
                                        config.data.mask_subdir)
               if r.split == "train"]
    if not records:
        raise ValueError(f"no training records under {config.data.root}")
    return records


def train(config: ExperimentConfig, work_dir: str | Path) -> TrainResult:
    """Run the configured experiment and write checkpoint + step log."""
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    set_determinism(config.seed)

    records = _train_records(config)
    model = build_model(config)
    _, _, mode = ABLATION_LADDER[config.ablation_id]
    trainer = SiameseTrainer(model, lr=config.train.lr,
                             weight_decay=config.train.weight_decay, mode=mode,
                             align_on_m1=config.train.align_on_m1, seed=config.seed)

    steps_per_epoch = max(1, (len(records) + config.train.batch_size - 1)
                          // config.train.batch_size)
    if config.train.max_steps is not None:
        total_steps = config.train.max_steps
    else:
        total_steps = config.train.epochs * steps_per_epoch

    order_rng = np.random.RandomState(config.seed)
    log_path = work_dir / "train_log.jsonl"
    checkpoint_path = work_dir / "checkpoint.pt"
    step = 0
    epoch = 0
    final_loss = float("nan")
    with open(log_path, "w") as log:
        while step < total_steps:
            epoch += 1
            shuffled = list(records)
            order_rng.shuffle(shuffled)
            for start in range(0, len(shuffled), config.train.batch_size):
                if step >= total_steps:
                    break
                chunk = shuffled[start:start + config.train.batch_size]
                batch = make_batch(chunk, config.msrcr, config.data.size,
                                   config.data.cache_dir)
                try:
                    report = trainer.step(batch)
                except RuntimeError as exc:
                    raise RuntimeError(f"training aborted at step {step}: {exc}") from exc
                step += 1
                final_loss = report.l_total
                if step % config.train.log_every == 0:
                    log.write(json.dumps({"step": step, "epoch": epoch,
                                          "l_seg": report.l_seg,
                                          "l_align": report.l_align,
                                          "l_total": report.l_total}) + "\n")
    save_checkpoint(checkpoint_path, model, trainer.optimizer, config, epoch, step)
    return TrainResult(checkpoint_path=checkpoint_path, log_path=log_path,
                       final_loss=final_loss, steps=step)


def _save_prob_png(prob: np.ndarray, path: Path) -> None:
    Image.fromarray((np.clip(prob, 0.0, 1.0) * 255).round().astype(np.uint8)).save(path)


@torch.no_grad()
def predict_image(model: APGNet, image_path: str | Path, size: int) -> np.ndarray:
    """Single-branch inference; probability map at the original resolution."""
    model.eval()
    try:
        with Image.open(image_path) as im:
            original_size = im.size  # (W, H)
            resized = im.convert("RGB").resize((size, size), Image.BILINEAR)
    except OSError as exc:
        raise OSError(f"failed to read image {image_path}: {exc}") from exc
    tensor = torch.from_numpy(
        np.asarray(resized, dtype=np.float32) / 255.0
    ).permute(2, 0, 1).unsqueeze(0)
    prob = model(tensor).final_prob[0, 0].numpy()
    if original_size != (size, size):
        prob = np.asarray(
            Image.fromarray(prob.astype(np.float32), mode="F").resize(
                original_size, Image.BILINEAR),
            dtype=np.float32,
        )
    return prob


def predict(checkpoint_path: str | Path, image_path: str | Path,
            out_prob: str | Path, out_mask: str | Path | None = None) -> None:
    """Write a probability map PNG and a 0.5-binarized mask PNG."""
    model, config = restore_model(load_checkpoint(checkpoint_path))
    prob = predict_image(model, image_path, config.data.size)
    _save_prob_png(prob, Path(out_prob))
    if out_mask is not None:
        mask = (prob >= 0.5).astype(np.uint8) * 255
        Image.fromarray(mask).save(out_mask)


def evaluate(checkpoint_path: str | Path, data_root: str | Path,
             split: str = "test", out_dir: str | Path | None = None) -> MetricReport:
    """Score a checkpoint on one split; predictions are exported as PNGs."""
    model, config = restore_model(load_checkpoint(checkpoint_path))
    records = [r for r in index_dataset(data_root, config.data.image_subdir,
                                        config.data.mask_subdir) if r.split == split]
    if not records:
        raise ValueError(f"no records for split {split!r} under {data_root}")
    if out_dir is None:
        out_dir = Path(checkpoint_path).parent / f"predictions_{split}"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for record in records:
        prob = predict_image(model, record.image_path, config.data.size)
        _save_prob_png(prob, out_dir / (record.image_path.stem + ".png"))
    gt_dir = records[0].mask_path.parent
    return evaluate_dataset(out_dir, gt_dir, config.metric)


def parameter_counts(config: ExperimentConfig) -> dict[str, int]:
    """Trainable parameter count of every ablation variant."""
    counts = {}
    for ablation_id in ABLATION_LADDER:
        variant = config_from_dict(
            {**config_to_dict(config), "ablation_id": ablation_id})
        torch.manual_seed(config.seed)
        counts[ablation_id] = build_model(variant).parameter_count()
    return counts


def ablate(config: ExperimentConfig, ladder: list[str],
           work_dir: str | Path) -> list[dict]:
    """Train and evaluate each requested variant under one seed."""
    unknown = [i for i in ladder if i not in ABLATION_LADDER or i == "full"]
    if unknown:
        raise ValueError(f"unknown ablation id(s): {unknown}")
    work_dir = Path(work_dir)
    rows = []
    for ablation_id in ladder:
        variant = config_from_dict(
            {**config_to_dict(config), "ablation_id": ablation_id})
        run_dir = work_dir / ablation_id
        result = train(variant, run_dir)
        model, _ = restore_model(load_checkpoint(result.checkpoint_path))
        report = evaluate(result.checkpoint_path, variant.data.root, split="test",
                          out_dir=run_dir / "predictions_test")
        rows.append({
            "ablation_id": ablation_id,
            "params": model.parameter_count(),
            "steps": result.steps,
            **report.to_dict(),
        })
    (work_dir / "ablation_report.json").write_text(json.dumps(rows, indent=2) + "\n")
    return rows


def format_ablation_table(rows: list[dict]) -> str:
    header = f"{'model':<6} {'mIoU':>7} {'S_a':>7} {'F_w':>7} {'E_phi':>7} {'MAE':>7} {'params':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['ablation_id']:<6} {row['miou']:>7.3f} {row['s_alpha']:>7.3f} "
            f"{row['f_beta_w']:>7.3f} {row['e_phi']:>7.3f} {row['mae']:>7.3f} "
            f"{row['params']:>10d}"
        )
    return "\n".join(lines)
