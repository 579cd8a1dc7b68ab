"""Region configuration: one JSON file per scenario binds a dataset to a
scaled synthetic population and simulation defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .abm import DiseaseParams, LayerConfig, Population, StageDurations, synthesize_population
from .errors import ConfigError
from .timeseries import Indicator

DEFAULT_COLUMN_MAP = {
    Indicator.NEW_TESTS: "new_tests",
    Indicator.NEW_DIAGNOSES: "new_diagnoses",
    Indicator.NEW_DEATHS: "new_deaths",
    Indicator.NUM_CRITICAL: "num_critical",
}


@dataclass(frozen=True)
class CalibrationSettings:
    window_length: int = 30
    trials_per_window: int = 300
    ensemble_size: int = 3
    statistics: tuple[str, ...] = ("new_diagnoses",)


@dataclass(frozen=True)
class RegionConfig:
    region: str
    dataset: str  # path, resolved relative to the config file
    population_size: int
    scale_factor: float
    age_distribution: tuple[float, ...]
    mean_household_size: float = 3.0
    layers: LayerConfig = field(default_factory=LayerConfig)
    beta: float = 0.016
    test_odds: float = 10.0
    initial_exposed: int = 10
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    seed: int = 0
    columns: dict | None = None  # indicator name -> CSV column

    def __post_init__(self):
        if self.scale_factor < 1:
            raise ConfigError("scale_factor must be >= 1")
        if self.population_size < 100:
            raise ConfigError("population_size must be >= 100")
        if len(self.age_distribution) != 10:
            raise ConfigError("age_distribution must have 10 bins")

    def dataset_path(self, config_path: str | Path | None = None) -> Path:
        p = Path(self.dataset)
        if not p.is_absolute() and config_path is not None:
            p = Path(config_path).parent / p
        return p

    def column_map(self) -> dict[Indicator, str]:
        if self.columns is None:
            return dict(DEFAULT_COLUMN_MAP)
        out = {}
        for key, col in self.columns.items():
            try:
                out[Indicator(key)] = col
            except ValueError:
                raise ConfigError(f"unknown indicator {key!r} in columns") from None
        return out

    def disease_params(self) -> DiseaseParams:
        return DiseaseParams(
            beta=self.beta,
            test_odds=self.test_odds,
            initial_exposed=self.initial_exposed,
        )

    def build_population(self) -> Population:
        return synthesize_population(
            self.population_size,
            np.asarray(self.age_distribution, dtype=float),
            mean_household_size=self.mean_household_size,
            layer_config=self.layers,
            seed=self.seed,
        )


def load_config(path: str | Path) -> RegionConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    try:
        cfg = _from_raw(raw)
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    ds = cfg.dataset_path(path)
    if not ds.exists():
        raise ConfigError(f"{path}: dataset not found: {ds}")
    return cfg


def _from_raw(raw: dict) -> RegionConfig:
    kwargs = dict(raw)
    if "layers" in kwargs:
        kwargs["layers"] = LayerConfig(**kwargs["layers"])
    if "calibration" in kwargs:
        cal = dict(kwargs["calibration"])
        if "statistics" in cal:
            cal["statistics"] = tuple(cal["statistics"])
        kwargs["calibration"] = CalibrationSettings(**cal)
    if "age_distribution" in kwargs:
        kwargs["age_distribution"] = tuple(float(x) for x in kwargs["age_distribution"])
    return RegionConfig(**kwargs)


def normalized_json(cfg: RegionConfig) -> str:
    """Canonical serialization: sorted keys, fixed separators."""
    return json.dumps(asdict(cfg), sort_keys=True, indent=2)
