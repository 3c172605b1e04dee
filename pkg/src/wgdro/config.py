"""JSON experiment configuration.

Schema (every key except ``dataset`` is optional)::

    {
      "dataset": "adult.csv",
      "column_names": null,          # list of names for header-less files
      "label_column": "income",
      "positive_label": ">50K",
      "race_column": "race",
      "education_column": "education",
      "train_fraction": 0.7,
      "subsample": null,             # stratified training subset size
      "seeds": [42],
      "methods": ["erm", "dro", "gdro", "ours"],
      "gammas": [0.0001],
      "environments": ["natural", 0.9, 0.5, 0.1],
      "env_size": 2000,
      "env_threshold": 0.5,
      "eta_theta": 0.1, "eta_q": 0.1, "eta_z": 0.05,
      "t_outer": 200, "t_rob": 100,
      "output_dir": "results"
    }

Environment entries are either ``"natural"`` (the whole test pool) or the
fraction of rows drawn from above the education threshold.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .trainer import METHODS

REFERENCE_SEEDS = (42, 18, 2025, 1999, 1453, 1821, 2023, 2024, 2020, 2021)
REFERENCE_GAMMAS = (1e-4, 1e-3, 1e-2, 1e-1, 0.5, 1.0, 3.0, 5.0, 6.0, 7.0, 8.0)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str
    column_names: list[str] | None = None
    label_column: str = "income"
    positive_label: str = ">50K"
    race_column: str = "race"
    education_column: str = "education"
    train_fraction: float = 0.7
    subsample: int | None = None
    seeds: list[int] = field(default_factory=lambda: [42])
    methods: list[str] = field(default_factory=lambda: ["erm", "dro", "gdro", "ours"])
    gammas: list[float] = field(default_factory=lambda: [1e-4])
    environments: list = field(default_factory=lambda: ["natural"])
    env_size: int = 2000
    env_threshold: float = 0.5
    eta_theta: float = 0.1
    eta_q: float = 0.1
    eta_z: float = 0.05
    t_outer: int = 200
    t_rob: int = 100
    output_dir: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.dataset, str) or not self.dataset:
            raise ConfigError("dataset: must be a non-empty path string")
        if not self.seeds:
            raise ConfigError("seeds: must be a non-empty list")
        for i, s in enumerate(self.seeds):
            if isinstance(s, bool) or not isinstance(s, int):
                raise ConfigError(f"seeds[{i}]: must be an integer")
        if not self.methods:
            raise ConfigError("methods: must be a non-empty list")
        for i, m in enumerate(self.methods):
            if m not in METHODS:
                raise ConfigError(f"methods[{i}]: unknown method {m!r}")
        if not self.gammas:
            raise ConfigError("gammas: must be a non-empty list")
        for i, g in enumerate(self.gammas):
            if not _is_number(g) or not g >= 0:
                raise ConfigError(f"gammas[{i}]: must be a nonnegative number")
        for i, e in enumerate(self.environments):
            if e == "natural":
                continue
            if not _is_number(e) or not 0 <= e <= 1:
                raise ConfigError(f"environments[{i}]: must be 'natural' or a fraction in [0, 1]")
        for name in ("eta_theta", "eta_q", "eta_z", "env_size", "t_outer", "t_rob"):
            v = getattr(self, name)
            if not _is_number(v) or not v > 0:
                raise ConfigError(f"{name}: must be positive")
        for name in ("env_size", "t_outer", "t_rob"):
            if not isinstance(getattr(self, name), int):
                raise ConfigError(f"{name}: must be an integer")
        if not _is_number(self.train_fraction) or not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction: must be in (0, 1)")
        if self.subsample is not None and (not isinstance(self.subsample, int) or self.subsample < 1):
            raise ConfigError("subsample: must be a positive integer or null")
        if not _is_number(self.env_threshold):
            raise ConfigError("env_threshold: must be a number")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    if "dataset" not in raw:
        raise ConfigError("dataset: required key missing")
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = config_from_dict(raw)
    ds = Path(cfg.dataset)
    if not ds.is_absolute():
        # dataset paths are relative to the config file
        cfg.dataset = str((path.parent / ds).resolve())
    return cfg
