"""attkit: rigid-body attitude simulation with hybrid finite-time controllers."""

from .config import (
    ScenarioConfig,
    load_config,
    preset,
    save_config,
)
from .sim import SimTrace, load_trace, run_scenario, save_trace

__all__ = [
    "ScenarioConfig",
    "SimTrace",
    "load_config",
    "load_trace",
    "preset",
    "run_scenario",
    "save_config",
    "save_trace",
]

__version__ = "0.1.0"
