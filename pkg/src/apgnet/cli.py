"""Command-line entry points.

Subcommands: fixtures, enhance, train, evaluate, predict, score, ablate.
Every experiment command accepts --profile (desk|paper) plus an optional
YAML config file; explicit flags override both.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import train as training
from .config import build_config
from .fixtures import generate_fixtures
from .metrics import MetricConfig, evaluate_dataset
from .msrcr import MsrcrConfig, msrcr


@click.group()
def main() -> None:
    """Prior-guided underwater camouflaged object segmentation toolkit."""


def _experiment_config(profile: str, config_file: str | None, data: str | None,
                       seed: int | None, steps: int | None, size: int | None,
                       ablation_id: str | None = None):
    overrides: dict = {}
    if data is not None:
        overrides.setdefault("data", {})["root"] = data
    if size is not None:
        overrides.setdefault("data", {})["size"] = size
    if seed is not None:
        overrides["seed"] = seed
    if steps is not None:
        overrides.setdefault("train", {})["max_steps"] = steps
    if ablation_id is not None:
        overrides["ablation_id"] = ablation_id
    return build_config(profile=profile, config_file=config_file, overrides=overrides)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--count", default=8, show_default=True, help="training images")
@click.option("--seed", default=0, show_default=True)
@click.option("--size", default=128, show_default=True)
def fixtures(out_dir: str, count: int, seed: int, size: int) -> None:
    """Generate the synthetic camouflage fixture dataset."""
    counts = generate_fixtures(out_dir, count=count, seed=seed, size=size)
    click.echo(f"wrote {counts['train']} train / {counts['test']} test fixtures to {out_dir}")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
def enhance(in_dir: str, out_dir: str, config_file: str | None) -> None:
    """Apply the enhancement transform to every image of a directory."""
    cfg = MsrcrConfig()
    if config_file is not None:
        experiment = build_config(config_file=config_file)
        cfg = experiment.msrcr
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for path in sorted(Path(in_dir).iterdir()):
        if path.suffix.lower() not in (".png", ".jpg", ".jpeg", ".bmp"):
            continue
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        result = msrcr(arr, cfg)
        Image.fromarray((result * 255).round().astype(np.uint8)).save(
            out / (path.stem + ".png"))
        n += 1
    click.echo(f"enhanced {n} images into {out_dir}")


@main.command()
@click.option("--data", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--profile", default="desk", show_default=True,
              type=click.Choice(["desk", "paper"]))
@click.option("--seed", type=int)
@click.option("--steps", type=int, help="cap on optimizer steps")
@click.option("--size", type=int, help="input resolution (multiple of 32)")
@click.option("--ablation-id", type=click.Choice(list(training.ABLATION_LADDER)))
def train(data: str | None, out_dir: str, config_file: str | None, profile: str,
          seed: int | None, steps: int | None, size: int | None,
          ablation_id: str | None) -> None:
    """Train a model and write checkpoint + step log."""
    config = _experiment_config(profile, config_file, data, seed, steps, size, ablation_id)
    result = training.train(config, out_dir)
    click.echo(f"finished {result.steps} steps, final loss {result.final_loss:.4f}")
    click.echo(f"checkpoint: {result.checkpoint_path}")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "test"]))
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@click.option("--json", "json_path", type=click.Path(dir_okay=False))
def evaluate(checkpoint: str, data: str, split: str, out_dir: str | None,
             json_path: str | None) -> None:
    """Run single-branch inference on a split and report the five metrics."""
    report = training.evaluate(checkpoint, data, split=split, out_dir=out_dir)
    click.echo(json.dumps(report.to_dict(), indent=2))
    if json_path is not None:
        report.save_json(json_path)


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-prob", required=True, type=click.Path(dir_okay=False))
@click.option("--out-mask", type=click.Path(dir_okay=False))
def predict(checkpoint: str, image: str, out_prob: str, out_mask: str | None) -> None:
    """Segment one image; writes probability and binarized mask PNGs."""
    training.predict(checkpoint, image, out_prob, out_mask)
    click.echo(f"wrote {out_prob}" + (f" and {out_mask}" if out_mask else ""))


@main.command()
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--json", "json_path", type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False))
@click.option("--e-mode", default="adaptive", show_default=True,
              type=click.Choice(["adaptive", "sweep"]))
def score(pred_dir: str, gt_dir: str, json_path: str | None, csv_path: str | None,
          e_mode: str) -> None:
    """Score a directory of prediction maps against ground-truth masks."""
    report = evaluate_dataset(pred_dir, gt_dir, MetricConfig(e_mode=e_mode))
    click.echo(json.dumps(report.to_dict(), indent=2))
    if json_path is not None:
        report.save_json(json_path)
    if csv_path is not None:
        report.save_csv(csv_path)


@main.command()
@click.option("--data", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--profile", default="desk", show_default=True,
              type=click.Choice(["desk", "paper"]))
@click.option("--seed", type=int)
@click.option("--steps", type=int)
@click.option("--size", type=int)
@click.option("--ladder", default="M1,M2,M3,M4,M5", show_default=True,
              help="comma-separated ablation ids")
def ablate(data: str | None, out_dir: str, config_file: str | None, profile: str,
           seed: int | None, steps: int | None, size: int | None, ladder: str) -> None:
    """Train and evaluate the ablation ladder; prints the summary table."""
    config = _experiment_config(profile, config_file, data, seed, steps, size)
    ids = [item.strip() for item in ladder.split(",") if item.strip()]
    rows = training.ablate(config, ids, out_dir)
    click.echo(training.format_ablation_table(rows))


if __name__ == "__main__":
    main()
