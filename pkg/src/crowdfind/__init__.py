"""Simulation and analysis of privacy-preserving crowdsourced object finding."""

from .config import ConfigError, SimConfig, desk_scale, parse_config
from .harness import RunReport, SweepSpec, run_once, run_sweep
from .protocol import InvalidParameter, ProtocolError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "InvalidParameter",
    "ProtocolError",
    "RunReport",
    "SimConfig",
    "SweepSpec",
    "desk_scale",
    "parse_config",
    "run_once",
    "run_sweep",
]
