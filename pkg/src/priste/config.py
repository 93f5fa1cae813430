"""Experiment configuration: dataclasses plus a TOML loader.

A minimal config::

    seed = 7
    T = 50
    repetitions = 100

    [grid]
    rows = 20
    cols = 20
    cell_size_m = 1000

    [model]
    source = "synth"      # "synth" | "csv" | "json"
    sigma = 3.0

    [mechanism]
    mechanism = "plm"
    alpha = 0.2

    [enforce]
    epsilons = [0.1, 0.5, 1.0]

    [[events]]
    kind = "presence"
    cells = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
    start = 4
    end = 8

Cell indices in configs are 0-based.  Timestamps are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from .errors import ConfigError
from .events import Event, event_from_dict
from .lppm import LppmSpec
from .statespace import GridMap

SOURCES = ("synth", "csv", "json")


@dataclass(frozen=True)
class ModelSource:
    source: str = "synth"
    sigma: float = 3.0
    path: str | None = None
    smoothing: float = 0.01
    resample_seconds: float | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"model.source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "synth" and not self.sigma > 0:
            raise ConfigError("model.sigma must be positive")
        if self.source != "synth" and not self.path:
            raise ConfigError(f"model.source = {self.source!r} needs model.path")
        if self.smoothing < 0:
            raise ConfigError("model.smoothing must be nonnegative")


@dataclass(frozen=True)
class EnforceSpec:
    epsilons: tuple = (0.5,)
    alphas: tuple = ()
    deltas: tuple = ()
    decay: float = 0.5
    check_budget_ms: float | None = None
    max_halvings: int = 40
    simplex: bool = True
    thresholds_ms: tuple = (10.0, 100.0, 1000.0, math.inf)

    def __post_init__(self):
        for name in ("epsilons", "thresholds_ms"):
            if not getattr(self, name):
                raise ConfigError(f"enforce.{name} must be non-empty")
        if any(not e > 0 for e in self.epsilons):
            raise ConfigError("every epsilon must be positive")
        if any(not a > 0 for a in self.alphas):
            raise ConfigError("every alpha must be positive")
        if any(not 0 <= d < 1 for d in self.deltas):
            raise ConfigError("every delta must lie in [0, 1)")
        if not 0 < self.decay < 1:
            raise ConfigError("enforce.decay must lie in (0, 1)")
        if self.check_budget_ms is not None and not self.check_budget_ms > 0:
            raise ConfigError("enforce.check_budget_ms must be positive")
        if any(not t > 0 for t in self.thresholds_ms):
            raise ConfigError("every threshold must be positive")
        if self.max_halvings < 0:
            raise ConfigError("enforce.max_halvings must be nonnegative")


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridMap = field(default_factory=lambda: GridMap(20, 20))
    model: ModelSource = field(default_factory=ModelSource)
    events: tuple = ()
    mechanism: LppmSpec = field(default_factory=LppmSpec)
    enforce: EnforceSpec = field(default_factory=EnforceSpec)
    repetitions: int = 100
    T: int = 50
    seed: int = 0
    workers: int = 1
    name: str = "experiment"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.T < 1:
            raise ConfigError("T must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not self.events:
            raise ConfigError("at least one event is required")
        for ev in self.events:
            if ev.m != self.grid.m:
                raise ConfigError(f"event masks have length {ev.m}, grid has {self.grid.m} cells")
            if ev.end > self.T:
                raise ConfigError(f"event window ends at {ev.end}, beyond T = {self.T}")

    @property
    def alphas(self) -> tuple:
        return self.enforce.alphas or (self.mechanism.alpha,)

    @property
    def deltas(self) -> tuple:
        return self.enforce.deltas or (self.mechanism.delta,)

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


def _floats(v, name):
    if isinstance(v, (int, float)):
        v = [v]
    try:
        return tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number or a list of numbers") from None


def _budget(v):
    if v is None:
        return None
    if isinstance(v, str) and v.lower() in ("inf", "none", "off"):
        return None
    v = float(v)
    return None if math.isinf(v) else v


def config_from_dict(d: dict, base_dir: Path | None = None) -> ExperimentConfig:
    base_dir = Path(".") if base_dir is None else base_dir
    try:
        grid = GridMap.from_config(d.get("grid", {"rows": 20, "cols": 20}))
        mb = dict(d.get("model", {}))
        if mb.get("path"):
            mb["path"] = str((base_dir / mb["path"]))
        if "resample_seconds" in mb:
            mb["resample_seconds"] = float(mb["resample_seconds"])
        model = ModelSource(**mb)
        mech = LppmSpec(**d.get("mechanism", {}))
        eb = dict(d.get("enforce", {}))
        for key in ("epsilons", "alphas", "deltas", "thresholds_ms"):
            if key in eb:
                eb[key] = _floats(eb[key], f"enforce.{key}")
        if "epsilon" in eb:
            eb["epsilons"] = _floats(eb.pop("epsilon"), "enforce.epsilon")
        if "check_budget_ms" in eb:
            eb["check_budget_ms"] = _budget(eb["check_budget_ms"])
        if "feasible_set" in eb:
            fs = eb.pop("feasible_set")
            if fs not in ("simplex", "box"):
                raise ConfigError("enforce.feasible_set must be 'simplex' or 'box'")
            eb["simplex"] = fs == "simplex"
        enforce = EnforceSpec(**eb)
        events = tuple(event_from_dict(e, grid.m) for e in d.get("events", []))
        return ExperimentConfig(
            grid=grid, model=model, events=events, mechanism=mech, enforce=enforce,
            repetitions=int(d.get("repetitions", 100)), T=int(d.get("T", 50)),
            seed=int(d.get("seed", 0)), workers=int(d.get("workers", 1)),
            name=str(d.get("name", "experiment")),
        )
    except TypeError as exc:
        # unknown keys in a block surface here
        raise ConfigError(f"invalid config: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            d = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(d, path.parent)
