"""Monte Carlo link simulator for remote-piloting connectivity.

Evaluates end-to-end reliability and delay of command-and-control downlinks
to aerial vehicles over direct ground, vehicle-relay, and high-altitude
platform paths, and finds the path combinations that satisfy a latency and
reliability target under finite-blocklength coding.
"""

__version__ = "0.1.0"

from . import channel, e2e, geometry, link, mathfun, queueing, scenario
from .mathfun import RngStream
from .scenario import (
    CANONICAL_COMBINATIONS,
    ConfigError,
    RegionResult,
    ScenarioConfig,
    SweepResult,
    config_hash,
    instantiate,
    load_config,
    run_operating_region,
    run_rate_sweep,
)

__all__ = [
    "__version__",
    "channel",
    "e2e",
    "geometry",
    "link",
    "mathfun",
    "queueing",
    "scenario",
    "RngStream",
    "CANONICAL_COMBINATIONS",
    "ConfigError",
    "RegionResult",
    "ScenarioConfig",
    "SweepResult",
    "config_hash",
    "instantiate",
    "load_config",
    "run_operating_region",
    "run_rate_sweep",
]
