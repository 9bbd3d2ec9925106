"""Experiment configuration: a validated key-value tree.

The schema mirrors the module knobs (data.*, model.*, train.*, msrcr.*,
metric.*) plus an ablation identifier and a seed. Unknown keys are
rejected before any work starts; a config round-trips through YAML and is
embedded verbatim in checkpoints.
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .apg import ApgConfig
from .backbone import BackboneConfig
from .erf import ErfConfig
from .metrics import MetricConfig
from .msrcr import MsrcrConfig

ABLATION_IDS = ("M1", "M2", "M3", "M4", "M5", "full")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    root: str | None = None
    size: int = 352
    cache_dir: str | None = None
    image_subdir: str = "Image"
    mask_subdir: str = "GT"

    def __post_init__(self) -> None:
        if self.size < 32 or self.size % 32 != 0:
            raise ConfigError(f"data.size must be a multiple of 32 and >= 32, got {self.size}")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 8e-5
    weight_decay: float = 0.1
    batch_size: int = 16
    epochs: int = 100
    align_on_m1: bool = False
    max_steps: int | None = None  # overrides epochs when set
    log_every: int = 1

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"train.lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class ModelSection:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    erf: ErfConfig = field(default_factory=ErfConfig)
    apg: ApgConfig = field(default_factory=ApgConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    msrcr: MsrcrConfig = field(default_factory=MsrcrConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)
    ablation_id: str = "full"
    seed: int = 0
    profile: str = "desk"

    def __post_init__(self) -> None:
        if self.ablation_id not in ABLATION_IDS:
            raise ConfigError(
                f"ablation_id must be one of {ABLATION_IDS}, got {self.ablation_id!r}"
            )


_SECTION_TYPES: dict[str, type] = {
    "data": DataConfig,
    "train": TrainConfig,
    "msrcr": MsrcrConfig,
    "metric": MetricConfig,
    "backbone": BackboneConfig,
    "erf": ErfConfig,
    "apg": ApgConfig,
    "model": ModelSection,
}

_LIST_AS_TUPLE_FIELDS = {"scales", "scale_weights", "channels", "dilations"}

# Short external key -> dataclass field, per the documented config surface.
_FIELD_ALIASES: dict[type, dict[str, str]] = {
    ErfConfig: {"channels": "out_channels"},
    MsrcrConfig: {"weights": "scale_weights", "alpha": "restoration_alpha",
                  "beta": "restoration_beta"},
}


def _build(cls: type, value: Any, path: str) -> Any:
    """Recursively build a dataclass from a plain dict, rejecting unknown keys."""
    if not dataclasses.is_dataclass(cls):
        return value
    if not isinstance(value, dict):
        raise ConfigError(f"{path or cls.__name__}: expected a mapping, got {type(value).__name__}")
    aliases = _FIELD_ALIASES.get(cls, {})
    value = {aliases.get(k, k): v for k, v in value.items()}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(value) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config key(s) under {path or 'top level'}: {sorted(unknown)}")
    kwargs = {}
    for name, item in value.items():
        child_path = f"{path}.{name}" if path else name
        sub_cls = _SECTION_TYPES.get(name)
        if sub_cls is not None and isinstance(item, dict):
            kwargs[name] = _build(sub_cls, item, child_path)
        elif name in _LIST_AS_TUPLE_FIELDS and isinstance(item, (list, tuple)):
            kwargs[name] = tuple(item)
        elif name == "routing" and isinstance(item, dict):
            kwargs[name] = {int(k): v for k, v in item.items()}
        else:
            kwargs[name] = item
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value under {path or 'top level'}: {exc}") from exc


def config_from_dict(tree: dict[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, tree, "")


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    def convert(obj: Any) -> Any:
        if dataclasses.is_dataclass(obj):
            return {f.name: convert(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return [convert(v) for v in obj]
        if isinstance(obj, dict):
            return {k: convert(v) for k, v in obj.items()}
        return obj
    return convert(config)


def load_config(path: str | Path) -> ExperimentConfig:
    tree = yaml.safe_load(Path(path).read_text())
    if tree is None:
        tree = {}
    return config_from_dict(tree)


def merge_tree(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; override wins on leaves."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key in merged and isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = merge_tree(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def desk_profile() -> dict[str, Any]:
    """CPU-friendly defaults: small inputs, tiny backbone, short runs."""
    return {
        "profile": "desk",
        "data": {"size": 128},
        "model": {"backbone": {"variant": "tiny", "channels": [16, 32, 64, 128]}},
        "train": {"lr": 3e-4, "weight_decay": 1e-4, "batch_size": 8,
                  "epochs": 1000, "max_steps": 200},
    }


def paper_profile() -> dict[str, Any]:
    """Full-scale recipe: 352 inputs, lr 8e-5, weight decay 0.1, batch 16."""
    return {
        "profile": "paper",
        "data": {"size": 352},
        "model": {"backbone": {"variant": "tiny", "channels": [16, 32, 64, 128]}},
        "train": {"lr": 8e-5, "weight_decay": 0.1, "batch_size": 16,
                  "epochs": 100, "max_steps": None},
    }


PROFILES = {"desk": desk_profile, "paper": paper_profile}


def build_config(profile: str = "desk", config_file: str | Path | None = None,
                 overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Layer profile defaults, then a YAML file, then explicit overrides."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}")
    tree = PROFILES[profile]()
    if config_file is not None:
        file_tree = yaml.safe_load(Path(config_file).read_text()) or {}
        tree = merge_tree(tree, file_tree)
    if overrides:
        tree = merge_tree(tree, overrides)
    return config_from_dict(tree)
