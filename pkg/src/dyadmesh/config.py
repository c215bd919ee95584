"""Flat ``key = value`` run configuration shared by every CLI subcommand."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .adaptation import Thresholds
from .matrix import RefinementBounds

__all__ = ["ExperimentConfig", "ConfigError", "EXPERIMENTS", "parse_config", "serialize_config", "load_config"]

EXPERIMENTS = ("generic-m1", "generic-m2", "generic-m3", "generic-m4", "euler", "cancer")

# (l_min, l_max, theta_refine, theta_coarsen, t_end)
_DEFAULTS = {
    "generic-m1": (5, 7, 0.8, 0.8, 0.8),
    "generic-m2": (3, 7, 0.8, 0.8, 1.0),
    "generic-m3": (3, 7, 0.8, 0.3, 1.0),
    "generic-m4": (3, 7, 0.5, 0.5, 1.0),
    "euler": (7, 9, 0.4, 0.4, 0.1),
    "cancer": (5, 7, 0.2, 0.1, 5.0),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """One run. ``None`` level/threshold/time fields take the experiment's defaults.

    ``dt`` is the pseudo time step of the generic monitor experiments; the PDE
    solvers choose their steps from ``cfl``. ``snapshot_every`` is a time
    interval; when unset, each experiment writes at its default times.
    ``variant`` selects the cancer experiment (uniform, heterogeneous,
    error-table); ``seed`` drives the default random ECM raster.
    """

    experiment: str = "generic-m1"
    d: int = 2
    l_min: int | None = None
    l_max: int | None = None
    m_r: int = 1
    theta_refine: float | None = None
    theta_coarsen: float | None = None
    dt: float = 0.005
    t_end: float | None = None
    cfl: float = 0.5
    snapshot_every: float | None = None
    coarsen_passes: int = 2
    variant: str = "uniform"
    ecm_raster: str | None = None
    out_dir: str | None = None
    seed: int = 2016

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        l_min, l_max, th_r, th_c, t_end = _DEFAULTS[self.experiment]
        if self.l_min is None:
            self.l_min = l_min
        if self.l_max is None:
            self.l_max = l_max
        if self.theta_refine is None:
            self.theta_refine = th_r
        if self.theta_coarsen is None:
            self.theta_coarsen = th_c
        if self.t_end is None:
            self.t_end = t_end
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if self.snapshot_every is not None and self.snapshot_every <= 0:
            raise ConfigError("snapshot_every must be positive")
        if self.variant not in ("uniform", "heterogeneous", "error-table"):
            raise ConfigError(f"unknown cancer variant {self.variant!r}")
        if self.experiment != "generic-m1" and self.d != 2:
            raise ConfigError(f"{self.experiment} runs in two dimensions only")
        try:
            self.bounds
            self.thresholds
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def bounds(self) -> RefinementBounds:
        return RefinementBounds(self.d, self.l_min, self.l_max, self.m_r)

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.theta_refine, self.theta_coarsen)

    def snapshot_times(self, default: tuple[float, ...]) -> tuple[float, ...]:
        if self.snapshot_every is None:
            times = [t for t in default if t < self.t_end] + [self.t_end]
        else:
            n = int(self.t_end / self.snapshot_every + 1e-9)
            times = [i * self.snapshot_every for i in range(n + 1)] + [self.t_end]
        return tuple(sorted(set(times)))


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    if raw.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment); keyword overrides win."""
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def serialize_config(config: ExperimentConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(config, name)
        lines.append(f"{name} = {'none' if value is None else value!r}".replace("'", ""))
    return "\n".join(lines) + "\n"


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, **overrides)
