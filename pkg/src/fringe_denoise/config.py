"""Run configuration: one JSON document driving every pipeline stage.

Sections are ``simulate``, ``dataset``, ``network``, ``train`` and
``eval``; every field is optional except the master ``seed``.  Unknown
keys are rejected wherever they appear, so a typo fails the run instead of
silently using a default.  The fully resolved configuration is echoed into
each run manifest.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import AUG_CODES, EXPAND, IN_PLACE
from .network import NetworkConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulateConfig:
    count: int = 8
    width: int = 256
    height: int = 256
    a0c_sq_range: tuple[float, float] = (1.0, 150.0)
    ned_lambda_range: tuple[float, float] = (0.0, 50.0)
    ar_sq: float = 1.0
    phi_r: float = 0.0
    index_origin: int = 1
    min_terms: int = 2
    max_terms: int = 5
    awgn_count: int = 0
    awgn_sigma: float = 10.0
    awgn_mode: str = IN_PLACE

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError(f"simulate.count must be >= 1, got {self.count}")
        if self.awgn_mode not in (IN_PLACE, "append"):
            raise ConfigError(
                f"simulate.awgn_mode must be 'in_place' or 'append', got {self.awgn_mode!r}"
            )
        if self.awgn_count < 0 or self.awgn_count > self.count:
            raise ConfigError(
                f"simulate.awgn_count must lie in [0, count], got {self.awgn_count}"
            )


@dataclass(frozen=True)
class DatasetConfig:
    patch_size: int = 80
    stride: int = 16
    augmentations: tuple[str, ...] = ()
    augment_mode: str = EXPAND

    def __post_init__(self) -> None:
        if self.patch_size < 1 or self.stride < 1:
            raise ConfigError("dataset.patch_size and dataset.stride must be positive")
        if self.augment_mode not in (EXPAND, IN_PLACE):
            raise ConfigError(
                f"dataset.augment_mode must be 'expand' or 'in_place', "
                f"got {self.augment_mode!r}"
            )
        for name in self.augmentations:
            if name not in AUG_CODES or name == "none":
                raise ConfigError(f"unknown augmentation {name!r}")


@dataclass(frozen=True)
class TrainSection:
    batch_size: int = 64
    learning_rate: float = 1e-3
    epochs: int = 35
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass(frozen=True)
class EvalSection:
    every: int = 1
    holdout_fraction: float = 0.1
    max_patches: int = 1024


@dataclass(frozen=True)
class RunConfig:
    seed: int
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def train_config(self, checkpoint_dir=None) -> TrainConfig:
        return TrainConfig(
            batch_size=self.train.batch_size,
            learning_rate=self.train.learning_rate,
            epochs=self.train.epochs,
            beta1=self.train.beta1,
            beta2=self.train.beta2,
            adam_eps=self.train.adam_eps,
            seed=self.seed,
            eval_every=self.eval.every,
            holdout_fraction=self.eval.holdout_fraction,
            eval_max_patches=self.eval.max_patches,
            checkpoint_dir=str(checkpoint_dir) if checkpoint_dir else None,
        )

    def resolved(self) -> dict:
        """All defaults materialized, suitable for manifest echoing."""
        return dataclasses.asdict(self)


_SECTIONS = {
    "simulate": SimulateConfig,
    "dataset": DatasetConfig,
    "network": NetworkConfig,
    "train": TrainSection,
    "eval": EvalSection,
}

_TUPLE_FIELDS = {"a0c_sq_range", "ned_lambda_range", "augmentations"}


def _build_section(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key{'s' if len(unknown) > 1 else ''} "
                          f"{', '.join(where + '.' + k for k in unknown)}")
    kwargs = {k: tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
              for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad {where} section: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS) - {"seed"})
    if unknown:
        raise ConfigError(f"unknown top-level key{'s' if len(unknown) > 1 else ''} "
                          f"{', '.join(unknown)}")
    if "seed" not in data:
        raise ConfigError("the master 'seed' is mandatory")
    seed = data["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    sections = {}
    for name, cls in _SECTIONS.items():
        body = data.get(name, {})
        if not isinstance(body, dict):
            raise ConfigError(f"section {name!r} must be a JSON object")
        sections[name] = _build_section(cls, body, name)
    return RunConfig(seed=seed, **sections)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
