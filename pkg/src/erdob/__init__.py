"""Experience-replay disturbance observer and finite-time rejection simulator."""

from .plant import (
    Exosystem,
    Reference,
    RegressorPlant,
    Scenario,
    builtin_scenario,
)
from .sim import (
    CompareReport,
    Metrics,
    SimConfig,
    SimTrace,
    SimulationBlowup,
    compare,
    config_echo,
    metrics,
    run,
    settle_time,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "RegressorPlant",
    "Exosystem",
    "Reference",
    "Scenario",
    "builtin_scenario",
    "SimConfig",
    "SimTrace",
    "Metrics",
    "CompareReport",
    "SimulationBlowup",
    "run",
    "metrics",
    "compare",
    "config_echo",
    "settle_time",
]
