"""Floor-field pedestrian model with adaptive time-span, bonds and aggressiveness-ranked conflicts."""

__version__ = "0.1.0"

from .core import AgentParams, ConfigError, LatticeGeometry, SimConfig, load_config, validate_config
from .engine import run, run_sweep

__all__ = [
    "AgentParams",
    "ConfigError",
    "LatticeGeometry",
    "SimConfig",
    "load_config",
    "run",
    "run_sweep",
    "validate_config",
]
