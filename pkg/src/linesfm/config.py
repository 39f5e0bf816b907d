"""Run configuration: schema, defaults, and loading from YAML/JSON files.

Every key is optional; an empty file yields the defaults below.  JSON is a
subset of YAML, so the config echo written into ``summary.json`` can be fed
back as a config file.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

log = logging.getLogger(__name__)

DOF_PRESETS = {
    "all": (1, 1, 1, 1, 1, 1),
    # planar mobile base: two linear axes and the yaw rate
    "omnidirectional-base": (1, 1, 0, 0, 0, 1),
}
COMPENSATION_MODES = ("estimate", "true", "none")
MULTILINE_STRATEGIES = ("average", "first")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class RunConfig:
    # scenario
    lines: int = 1
    seed: int = 0
    cube_side: float = 3.0
    cube_z0: float = 1.0
    chi_hat_range: tuple[float, float] = (0.1, 1.0)
    nu_init: tuple[float, float, float] | None = None
    nu_init_speed: float = 0.1
    # integration
    dt: float = 1e-3
    duration: float = 5.0
    # observer
    alpha: float = 2000.0
    d2: float = 1.0
    # controller
    k1: float = 1.0
    k2: float = 1.0
    sigma_des_sq: tuple[float, float] = (0.1, 0.2)
    compensation: str = "estimate"
    multiline_strategy: str = "average"
    # actuation and sensing
    dof_mask: str | tuple[int, int, int, int, int, int] = "all"
    noise_nu_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise_omega_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # metrics
    convergence_fraction: float = 0.05
    # Monte Carlo
    runs: int = 50
    workers: int = 1
    # output
    out: str = "out"
    plot_data: bool = False
    figures: bool = False
    log_level: str = "INFO"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @property
    def mask(self) -> tuple[int, ...]:
        if isinstance(self.dof_mask, str):
            return DOF_PRESETS[self.dof_mask]
        return self.dof_mask

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return from_mapping(d)


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def _num(key, v, *, integer=False, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}", key)
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {v!r}", key)
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{key}: must be finite", key)
    if positive and not v > 0:
        raise ConfigError(f"{key}: must be > 0, got {v}", key)
    if nonneg and v < 0:
        raise ConfigError(f"{key}: must be >= 0, got {v}", key)
    return v


def _vec(key, v, n, **kw):
    if isinstance(v, (int, float)) and not isinstance(v, bool) and n == 3:
        v = [v] * 3
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ConfigError(f"{key}: expected a list of {n} numbers, got {v!r}", key)
    return tuple(_num(key, x, **kw) for x in v)


def _choice(key, v, options):
    if v not in options:
        raise ConfigError(f"{key}: must be one of {', '.join(options)}; got {v!r}", key)
    return v


def _bool(key, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{key}: expected true/false, got {v!r}", key)
    return v


def from_mapping(data: dict[str, Any] | None) -> RunConfig:
    """Validate a mapping of config keys and fill in defaults."""
    data = dict(data or {})
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config key: {unknown[0]}", unknown[0])
    out: dict[str, Any] = {}
    for key, v in data.items():
        if key in ("lines", "runs", "workers"):
            out[key] = _num(key, v, integer=True, positive=True)
        elif key == "seed":
            out[key] = _num(key, v, integer=True, nonneg=True)
        elif key in ("cube_side", "cube_z0", "nu_init_speed", "dt", "duration",
                     "alpha", "d2", "k1", "k2"):
            out[key] = _num(key, v, positive=True)
        elif key == "convergence_fraction":
            out[key] = _num(key, v, positive=True)
            if out[key] >= 1:
                raise ConfigError(f"{key}: must be < 1", key)
        elif key == "chi_hat_range":
            lo, hi = _vec(key, v, 2)
            if not lo < hi:
                raise ConfigError(f"{key}: lower bound must be below upper bound", key)
            out[key] = (lo, hi)
        elif key == "nu_init":
            out[key] = None if v is None else _vec(key, v, 3)
        elif key == "sigma_des_sq":
            out[key] = _vec(key, v, 2, positive=True)
        elif key in ("noise_nu_std", "noise_omega_std"):
            out[key] = _vec(key, v, 3, nonneg=True)
        elif key == "dof_mask":
            if isinstance(v, str):
                out[key] = _choice(key, v, tuple(DOF_PRESETS))
            else:
                m = _vec(key, v, 6, integer=True, nonneg=True)
                if any(x not in (0, 1) for x in m):
                    raise ConfigError(f"{key}: entries must be 0 or 1", key)
                out[key] = m
        elif key == "compensation":
            out[key] = _choice(key, v, COMPENSATION_MODES)
        elif key == "multiline_strategy":
            out[key] = _choice(key, v, MULTILINE_STRATEGIES)
        elif key in ("plot_data", "figures"):
            out[key] = _bool(key, v)
        elif key == "log_level":
            if not isinstance(v, str):
                raise ConfigError(f"{key}: expected a string", key)
            out[key] = _choice(key, v.upper(), LOG_LEVELS)
        elif key == "out":
            if not isinstance(v, str) or not v:
                raise ConfigError(f"{key}: expected a path string", key)
            out[key] = v
    cfg = RunConfig(**out)
    if cfg.duration < cfg.dt:
        raise ConfigError("duration: must be >= dt", "duration")
    return cfg


def load_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML/JSON: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at top level")
    return data


def parse_config(path: str | Path | None = None,
                 overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load ``path`` (optional), apply ``overrides``, validate, log defaults."""
    data = load_file(path) if path is not None else {}
    data.update(overrides or {})
    cfg = from_mapping(data)
    for name in FIELD_NAMES:
        if name not in data:
            log.info("config default %s = %r", name, getattr(cfg, name))
    return cfg
