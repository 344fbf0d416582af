"""Simulation configuration and its ``key = value`` text format.

Example file::

    # full-size geometry, advanced scheme
    scheme = advanced
    p_thre = 0.2
    omega = 20

Lines starting with ``#`` and blank lines are ignored.  Keys are the
:class:`SimConfig` field names.  Accepted aliases: ``lambda``/``λ`` for
``lam``, ``w``/``ω`` for ``omega``, ``τ`` for ``tau`` and ``N`` for ``C``.
Absent keys keep their defaults.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

__all__ = ["ConfigError", "SimConfig", "parse_config", "format_config", "desk_scale"]

SCHEMES = ("basic", "advanced")
MU_MODES = ("as_written", "oracle")
PLACEMENTS = ("uniform", "poisson")
CHI2_MODES = ("counts", "frequency")


class ConfigError(ValueError):
    """A configuration key is unknown or violates its bound."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SimConfig:
    # deployment
    C: int = 10_000
    side: float = 2000.0
    R: float = 50.0
    zone_size: float = 250.0
    placement: str = "uniform"
    # protocol
    q: float = 0.9
    f: int = 300
    k: int = 10
    omega: int = 15
    p_thre: float = 0.1
    tau: int = 2
    lam: int = 50
    scheme: str = "advanced"
    chi2_mode: str = "counts"
    # experiment
    fp_mode: bool = False
    mu_mode: str = "oracle"
    seed: int = 0
    replicates: int = 100
    round_cap: int = 200
    fixed_rounds: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, key: str, msg: str):
            if not cond:
                raise ConfigError(key, msg)

        need(self.C >= 1, "C", f"must be >= 1, got {self.C}")
        need(self.side > 0, "side", f"must be > 0, got {self.side}")
        need(self.R > 0, "R", f"must be > 0, got {self.R}")
        need(self.zone_size > 0, "zone_size", f"must be > 0, got {self.zone_size}")
        need(self.placement in PLACEMENTS, "placement", f"must be one of {PLACEMENTS}")
        need(0.0 <= self.q <= 1.0, "q", f"must be in [0, 1], got {self.q}")
        need(self.f >= 1, "f", f"must be >= 1, got {self.f}")
        need(self.k >= 1, "k", f"must be >= 1, got {self.k}")
        need(self.omega >= 1, "omega", f"must be >= 1, got {self.omega}")
        need(self.omega <= self.f, "omega", f"must be <= f={self.f}, got {self.omega}")
        need(0.0 <= self.p_thre <= 1.0, "p_thre", f"must be in [0, 1], got {self.p_thre}")
        need(self.tau >= 2, "tau", f"must be >= 2, got {self.tau}")
        need(self.lam >= 1, "lam", f"must be >= 1, got {self.lam}")
        need(self.scheme in SCHEMES, "scheme", f"must be one of {SCHEMES}")
        need(self.chi2_mode in CHI2_MODES, "chi2_mode", f"must be one of {CHI2_MODES}")
        need(self.mu_mode in MU_MODES, "mu_mode", f"must be one of {MU_MODES}")
        need(self.replicates >= 1, "replicates", f"must be >= 1, got {self.replicates}")
        need(self.round_cap >= 1, "round_cap", f"must be >= 1, got {self.round_cap}")
        need(self.fixed_rounds >= 0, "fixed_rounds", f"must be >= 0, got {self.fixed_rounds}")
        need(0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer")

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def avg_neighbors(self) -> int:
        """``c = floor(pi N R^2 / S)``."""
        return math.floor(math.pi * self.C * self.R**2 / self.area)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def desk_scale(config: SimConfig | None = None) -> SimConfig:
    """Same density as the full-size geometry on a 500 m square (625 detectors)."""
    return (config or SimConfig()).replace(C=625, side=500.0)


_ALIASES = {"lambda": "lam", "λ": "lam", "w": "omega", "ω": "omega", "τ": "tau", "N": "C"}
_FIELDS = {fld.name: fld for fld in fields(SimConfig)}


def _coerce(key: str, raw: str):
    typ = _FIELDS[key].type
    raw = raw.strip()
    try:
        if typ == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            try:
                return int(raw)
            except ValueError:
                val = float(raw)  # accept "1e4" and "20.0"
            if val != int(val):
                raise ValueError(raw)
            return int(val)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {typ}") from None
    return raw


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse ``key = value`` lines on top of ``base`` (full-size defaults)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        values[key] = _coerce(key, raw)
    return dataclasses.replace(base or SimConfig(), **values)


def format_config(config: SimConfig) -> str:
    return "".join(f"{fld.name} = {getattr(config, fld.name)}\n" for fld in fields(SimConfig))
