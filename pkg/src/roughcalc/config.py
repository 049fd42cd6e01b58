"""Plain key=value run configuration.

Config files are text: one ``key = value`` per line, ``#`` comments, blank
lines ignored.  CLI overrides are the same syntax.  Unknown keys are
configuration errors, reported before any computation starts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .models import CovarianceModel, ModelKind, TimeGrid

__all__ = ["ExperimentConfig", "parse_config_text", "load_config", "DEFAULTS"]

_INT_KEYS = {"grid_n", "paths", "seed", "workers", "nodes", "mc_n", "offsets",
             "elements"}
_FLOAT_KEYS = {"hurst", "alpha", "beta", "horizon"}
_STR_KEYS = {"model", "spacing", "functional", "method", "sampler", "out_dir"}
_LIST_INT_KEYS = {"grid_sweep"}
_LIST_FLOAT_KEYS = {"times", "hurst_sweep"}
_ALL_KEYS = (_INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_INT_KEYS
             | _LIST_FLOAT_KEYS)

# Experiments making statistical claims refuse smaller ensembles.
MIN_STATISTICAL_PATHS = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "fbm"
    hurst: float = 0.25
    alpha: float = 1.0
    beta: float = 1.0
    grid_n: int = 64
    horizon: float = 1.0
    spacing: str = "uniform"
    times: tuple[float, ...] | None = None
    paths: int = 20000
    seed: int = 42
    workers: int = 1
    functional: str = "quadratic"
    grid_sweep: tuple[int, ...] = (8, 16, 32, 64)
    hurst_sweep: tuple[float, ...] = (0.1, 0.25, 0.4, 0.5)
    offsets: int = 6
    elements: int = 100
    nodes: int = 32
    method: str = "quadrature"
    mc_n: int = 4096
    sampler: str = "cholesky"
    out_dir: str = field(default_factory=lambda: os.environ.get("ROUGHCALC_OUT_DIR", "."))

    def __post_init__(self):
        if self.model not in ("bm", "fbm", "mixed"):
            raise ConfigError(f"model must be bm|fbm|mixed, got {self.model!r}")
        if self.model != "bm" and not 0.0 < self.hurst < 1.0:
            raise ConfigError(f"hurst must lie in (0, 1), got {self.hurst!r}")
        if self.spacing not in ("uniform", "explicit"):
            raise ConfigError(f"spacing must be uniform|explicit, got {self.spacing!r}")
        if self.spacing == "explicit" and not self.times:
            raise ConfigError("spacing=explicit requires a times list")
        if self.grid_n < 1:
            raise ConfigError("grid_n must be >= 1")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if self.method not in ("quadrature", "mc"):
            raise ConfigError(f"method must be quadrature|mc, got {self.method!r}")
        if self.sampler not in ("cholesky", "circulant"):
            raise ConfigError(f"sampler must be cholesky|circulant, got {self.sampler!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.model == "mixed":
            if self.alpha < 0.0 or self.beta < 0.0:
                raise ConfigError("mixed weights alpha/beta must be nonnegative")
            if self.alpha == 0.0 and self.beta == 0.0:
                raise ConfigError("mixed weights must not both be zero")

    def covariance_model(self) -> CovarianceModel:
        if self.model == "bm":
            return CovarianceModel.bm()
        if self.model == "fbm":
            return CovarianceModel.fbm(self.hurst)
        return CovarianceModel.mixed(self.alpha, self.beta, self.hurst)

    def grid(self, n: int | None = None) -> TimeGrid:
        if self.spacing == "explicit":
            return TimeGrid(np.asarray(self.times, dtype=float), self.horizon)
        return TimeGrid.uniform_grid(n if n is not None else self.grid_n, self.horizon)

    def require_statistical(self) -> None:
        if self.paths < MIN_STATISTICAL_PATHS:
            raise ConfigError(
                f"statistical experiments need paths >= {MIN_STATISTICAL_PATHS}, "
                f"got {self.paths}"
            )

    def hurst_label(self) -> str:
        if self.model == "bm":
            return "0.5"
        return format(self.hurst, "g")

    # Execution details, not experiment definition: reports must be
    # byte-identical across worker counts and output locations.
    _ECHO_EXCLUDED = ("workers", "out_dir")

    def echo(self) -> dict:
        """Plain-dict echo of the experiment-defining fields."""
        out = {}
        for f in fields(self):
            if f.name in self._ECHO_EXCLUDED:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


DEFAULTS = ExperimentConfig()


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _LIST_INT_KEYS:
            return tuple(int(p) for p in raw.split(",") if p.strip())
        if key in _LIST_FLOAT_KEYS:
            return tuple(float(p) for p in raw.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def parse_config_text(text: str) -> dict:
    """key=value lines -> {key: typed value}; unknown keys raise ConfigError."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def load_config(
    path: str | None = None, overrides: dict | None = None
) -> ExperimentConfig:
    """Defaults, then file, then overrides; each layer wins over the last."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if overrides:
        for key, val in overrides.items():
            if key not in _ALL_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _parse_value(key, str(val)) if isinstance(val, str) else val
    try:
        return replace(DEFAULTS, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
