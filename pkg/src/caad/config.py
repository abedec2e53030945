"""Run configuration: one dataclass tree covering data synthesis, model
shapes, losses, training, uncertainty, and calibration, with JSON round-trip
and dotted-path overrides for the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, get_args, get_origin, get_type_hints

from .errors import ConfigError
from .objectives import LossConfig
from .transforms import TransformConfig


@dataclass(frozen=True)
class DataConfig:
    preset: str = "desk"               # scenario preset name
    grid_size: int = 32
    n_train: int = 600
    n_val: int = 150
    n_test: int = 300
    p_thresh: float = 0.0005           # denoise / natural-anomaly probability
    injection_fraction: float = 1.0
    seed: int = 0
    # MNIST-protocol knobs (used when preset == "mnist")
    benign_digit: int = 4
    mnist_dir: str = "data/mnist"


@dataclass(frozen=True)
class ModelConfig:
    gen_base_channels: int = 16
    critic_base_channels: int = 16
    embedding_dim: int = 512
    dropout_p: float = 0.5


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-4
    adam_beta1: float = 0.0
    adam_beta2: float = 0.9
    critic_steps_per_gen_step: int = 5
    seed: int = 0
    deterministic: bool = False        # single-threaded, bit-reproducible

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0, batch_size >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.critic_steps_per_gen_step < 1:
            raise ConfigError("critic_steps_per_gen_step must be >= 1")


@dataclass(frozen=True)
class RetrainConfig:
    epochs: int = 7
    h_percent: float = 5.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("retrain epochs must be >= 0")
        if not (0.0 <= self.h_percent <= 100.0):
            raise ConfigError("h_percent must be in [0, 100]")


@dataclass(frozen=True)
class UQConfig:
    mc_samples: int = 10
    seed: int = 0


@dataclass(frozen=True)
class DetectorConfig:
    clusters: int = 1
    strictness: float = 0.99
    centroid_agg: str = "max"
    seed: int = 0


@dataclass(frozen=True)
class AblationFlags:
    no_cl: bool = False        # drop the contrastive term
    no_uq: bool = False        # deterministic inference, no MC dropout
    no_unet: bool = False      # generator without skip connections
    no_wgan_gp: bool = False   # standard GAN cross-entropy, no penalty

    def any(self) -> bool:
        return self.no_cl or self.no_uq or self.no_unet or self.no_wgan_gp


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    transform: TransformConfig = field(default_factory=TransformConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    retrain: RetrainConfig = field(default_factory=RetrainConfig)
    uq: UQConfig = field(default_factory=UQConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _build(cls, d)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2,
                                         sort_keys=True))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_overrides(self, assignments: list[str]) -> "RunConfig":
        """Apply `section.key=value` assignments (values parsed as JSON,
        falling back to bare strings)."""
        d = self.to_dict()
        for item in assignments:
            if "=" not in item:
                raise ConfigError(f"override '{item}' is not key=value")
            path, raw = item.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = d
            *parents, leaf = path.split(".")
            for p in parents:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(f"unknown config section '{p}' in '{item}'")
                node = node[p]
            if leaf not in node:
                raise ConfigError(f"unknown config key '{path}'")
            node[leaf] = value
        return RunConfig.from_dict(d)


def desk_run_config(seed: int = 0) -> RunConfig:
    """Tuned CPU-scale configuration for the synthetic spectrum experiment:
    32x32 grids, 600/150/300 windows, reduced-width nets, 30 epochs."""
    return RunConfig(
        data=DataConfig(preset="desk", grid_size=32, n_train=600, n_val=150,
                        n_test=300, injection_fraction=1.0, seed=seed),
        transform=TransformConfig(kind="salt_noise", salt_fraction=0.02,
                                  salt_value=0.5, seed=seed),
        model=ModelConfig(gen_base_channels=48, critic_base_channels=48,
                          embedding_dim=256),
        train=TrainConfig(epochs=30, batch_size=32, seed=seed),
        uq=UQConfig(mc_samples=10, seed=seed),
        detector=DetectorConfig(seed=seed),
    )


def mnist_run_config(seed: int = 0) -> RunConfig:
    """Reduced-scale one-class digit configuration: 2000 benign-digit
    training images at 32x32, 20 epochs."""
    return RunConfig(
        data=DataConfig(preset="mnist", grid_size=32, n_train=2000,
                        n_val=800, n_test=10000, seed=seed),
        transform=TransformConfig(kind="rot90", rot_choices=(1, 2, 3),
                                  seed=seed),
        model=ModelConfig(gen_base_channels=32, critic_base_channels=32,
                          embedding_dim=256),
        train=TrainConfig(epochs=20, batch_size=32, seed=seed),
        uq=UQConfig(mc_samples=10, seed=seed),
        detector=DetectorConfig(seed=seed),
    )


def _build(cls, d: dict):
    """Recursively build a dataclass from a plain dict, coercing lists to
    tuples where the field says so."""
    if not isinstance(d, dict):
        raise ConfigError(f"expected object for {cls.__name__}, got {type(d)}")
    hints = get_type_hints(cls)
    kwargs: dict[str, Any] = {}
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(
            f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    for f in fields(cls):
        if f.name not in d:
            continue
        value = d[f.name]
        ftype = hints[f.name]
        if is_dataclass(ftype) and isinstance(value, dict):
            value = _build(ftype, value)
        elif get_origin(ftype) is tuple and isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)
