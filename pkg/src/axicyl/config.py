"""Flat key = value run configuration.

The config format is plain text, one `dotted.key = value` per line, with
# comments and blank lines ignored.  No sections, trivially diffable:

    grid.n_r = 129
    time.t_end = 1.0
    scheme.advection = centered2
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Unusable configuration input."""


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _get(mapping, key, default, cast):
    raw = mapping.get(key)
    if raw is None:
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def _get_float(mapping, key, default):
    return _get(mapping, key, default, float)


def _get_int(mapping, key, default):
    return _get(mapping, key, default, int)


def _get_choice(mapping, key, default, choices):
    val = mapping.get(key, default)
    if val not in choices:
        raise ConfigError(f"{key} must be one of {choices}, got {val!r}")
    return val


ADVECTION_SCHEMES = ("centered2", "upwind1")
DIFFUSION_SCHEMES = ("crank_nicolson", "explicit")
INIT_KINDS = ("no_swirl_bump", "swirl_bump", "random_modes")


@dataclass
class SolverConfig:
    """Grid, stepping, scheme, and initial-data parameters of one run."""

    r_min: float = 1.0
    R: float = 3.0
    L_z: float = 2.0
    n_r: int = 129
    n_z: int = 128

    dt: float | None = None  # None: adaptive from the CFL bound
    cfl: float = 0.4
    t_end: float = 1.0
    output_interval: float = 0.05

    advection: str = "centered2"
    diffusion: str = "crank_nicolson"

    init_kind: str = "swirl_bump"
    amplitude: float = 1.0
    omega_amplitude: float | None = None
    r_lo: float | None = None
    r_hi: float | None = None
    z_lo: float | None = None
    z_hi: float | None = None
    z_mode: int = 1
    n_modes: int = 4
    seed: int = 0

    blowup_threshold: float = 1e12
    checkpoint: str = "final"  # final | none

    def __post_init__(self):
        if not (0 < self.cfl <= 1):
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be non-negative, got {self.t_end}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.output_interval <= 0:
            raise ConfigError(f"output_interval must be positive, got {self.output_interval}")
        if self.advection not in ADVECTION_SCHEMES:
            raise ConfigError(f"advection must be one of {ADVECTION_SCHEMES}")
        if self.diffusion not in DIFFUSION_SCHEMES:
            raise ConfigError(f"diffusion must be one of {DIFFUSION_SCHEMES}")
        if self.init_kind not in INIT_KINDS:
            raise ConfigError(f"init.kind must be one of {INIT_KINDS}")

    @property
    def r_support(self) -> tuple[float, float] | None:
        if self.r_lo is None and self.r_hi is None:
            return None
        if self.r_lo is None or self.r_hi is None:
            raise ConfigError("init.r_lo and init.r_hi must be given together")
        return (self.r_lo, self.r_hi)

    @property
    def z_support(self) -> tuple[float, float] | None:
        if self.z_lo is None and self.z_hi is None:
            return None
        if self.z_lo is None or self.z_hi is None:
            raise ConfigError("init.z_lo and init.z_hi must be given together")
        return (self.z_lo, self.z_hi)

    @classmethod
    def from_mapping(cls, m: dict[str, str], seed_override: int | None = None) -> "SolverConfig":
        dt = m.get("time.dt")
        cfg = cls(
            r_min=_get_float(m, "grid.r_min", 1.0),
            R=_get_float(m, "grid.R", 3.0),
            L_z=_get_float(m, "grid.L_z", 2.0),
            n_r=_get_int(m, "grid.n_r", 129),
            n_z=_get_int(m, "grid.n_z", 128),
            dt=None if dt in (None, "auto") else _get_float(m, "time.dt", None),
            cfl=_get_float(m, "time.cfl", 0.4),
            t_end=_get_float(m, "time.t_end", 1.0),
            output_interval=_get_float(m, "time.output_interval", 0.05),
            advection=_get_choice(m, "scheme.advection", "centered2", ADVECTION_SCHEMES),
            diffusion=_get_choice(m, "scheme.diffusion", "crank_nicolson", DIFFUSION_SCHEMES),
            init_kind=_get_choice(m, "init.kind", "swirl_bump", INIT_KINDS),
            amplitude=_get_float(m, "init.amplitude", 1.0),
            omega_amplitude=_get_float(m, "init.omega_amplitude", None),
            r_lo=_get_float(m, "init.r_lo", None),
            r_hi=_get_float(m, "init.r_hi", None),
            z_lo=_get_float(m, "init.z_lo", None),
            z_hi=_get_float(m, "init.z_hi", None),
            z_mode=_get_int(m, "init.z_mode", 1),
            n_modes=_get_int(m, "init.n_modes", 4),
            seed=_get_int(m, "init.seed", 0),
            blowup_threshold=_get_float(m, "run.blowup_threshold", 1e12),
            checkpoint=_get_choice(m, "output.checkpoint", "final", ("final", "none")),
        )
        if seed_override is not None:
            cfg.seed = seed_override
        if not math.isfinite(cfg.t_end):
            raise ConfigError("time.t_end must be finite")
        return cfg
