"""Experiment configuration: strict schema, JSON round-trip, defaults.

The default profile carries the method's published constants: growth
ratio 0.25, magnitude-pruning ratio 0.2, core coverage tau 0.9, adaptive
patience 3 epochs, and a 10% validation split.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .model import ConfigError

DEFAULT_GAMMA = 0.25
DEFAULT_PRUNE_RATIO = 0.2
DEFAULT_TAU = 0.9
DEFAULT_PATIENCE = 3
DEFAULT_VAL_FRACTION = 0.1
DEFAULT_PLATEAU_THRESHOLD = 0.95


@dataclass
class DatasetSpec:
    kind: str = "synth"            # synth | synth-images | idx | cifar
    path: str | None = None        # data file/dir for idx/cifar
    labels_path: str | None = None
    n: int = 4000                  # synth sizes
    dims: int = 784
    classes: int = 10
    separation: float = 2.0
    noise: float = 1.0             # synth-images noise scale
    patch: int = 6                 # synth-images signal patch side
    subsample: float | None = None
    val_fraction: float = DEFAULT_VAL_FRACTION
    seed: int | None = None        # fixed data seed; None follows the run seed


@dataclass
class InitSpec:
    method: str = "phew"           # phew | uniform-random | erk
    rho_init: float = 0.05


@dataclass
class RoughSpec:
    mode: str = "adaptive"         # fixed | adaptive
    epochs: int = 5
    patience: int = DEFAULT_PATIENCE
    max_epochs: int = 20


@dataclass
class StoppingSpec:
    tau: float = DEFAULT_TAU
    plateau_threshold: float = DEFAULT_PLATEAU_THRESHOLD
    plateau_mode: str = "absolute"  # absolute | increment
    min_points: int = 4
    density_cap: float = 0.95


@dataclass
class OptimizerSpec:
    kind: str = "sgd"
    lr: float = 0.1
    momentum: float = 0.9
    batch_size: int = 128
    extensive_epochs: int = 15
    lr_decay_milestones: list = field(default_factory=list)  # epoch indices
    lr_decay_factor: float = 0.1


@dataclass
class ExperimentConfig:
    arch: str = "mlp-784-128-128-10"
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    init: InitSpec = field(default_factory=InitSpec)
    growth_method: str = "pwmpr"    # pwmpr | pwmp | rg | gg
    gamma: float = DEFAULT_GAMMA
    prune_ratio: float = DEFAULT_PRUNE_RATIO
    rough: RoughSpec = field(default_factory=RoughSpec)
    stopping: StoppingSpec = field(default_factory=StoppingSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    seed: int = 0
    out_dir: str = "runs"

    def validate(self):
        if self.growth_method not in ("pwmpr", "pwmp", "rg", "gg"):
            raise ConfigError(f"unknown growth method {self.growth_method!r}")
        if not 0 < self.gamma:
            raise ConfigError("gamma must be positive")
        if not 0 < self.prune_ratio < 1:
            raise ConfigError("prune_ratio must be in (0,1)")
        if not 0 < self.init.rho_init <= 1:
            raise ConfigError("rho_init must be in (0,1]")
        if self.rough.mode not in ("fixed", "adaptive"):
            raise ConfigError(f"unknown rough mode {self.rough.mode!r}")
        if self.stopping.plateau_mode not in ("absolute", "increment"):
            raise ConfigError(
                f"unknown plateau mode {self.stopping.plateau_mode!r}")
        if self.dataset.kind not in ("synth", "synth-images", "idx", "cifar"):
            raise ConfigError(f"unknown dataset kind {self.dataset.kind!r}")
        return self


_NESTED = {
    "dataset": DatasetSpec,
    "init": InitSpec,
    "rough": RoughSpec,
    "stopping": StoppingSpec,
    "optimizer": OptimizerSpec,
}


def _from_dict(cls, d):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - fields
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**d)


def config_from_dict(d) -> ExperimentConfig:
    d = dict(d)
    kwargs = {}
    for key, cls in _NESTED.items():
        if key in d:
            sub = d.pop(key)
            if not isinstance(sub, dict):
                raise ConfigError(f"{key} must be a mapping")
            kwargs[key] = _from_dict(cls, sub)
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(d)
    return ExperimentConfig(**kwargs).validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
