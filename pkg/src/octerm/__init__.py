"""Termination values of one-counter simple stochastic games, within a given epsilon."""
from .approx import ApproxReport, ModeSwitchStrategy, approximate_termination
from .model import Config, CounterlessStrategy, OcSsg, Owner, builtin_example, parse_ocssg, serialize_ocssg, validate
from .oracle import finite_horizon_bounds, simulate

__all__ = [
    "ApproxReport",
    "Config",
    "CounterlessStrategy",
    "ModeSwitchStrategy",
    "OcSsg",
    "Owner",
    "approximate_termination",
    "builtin_example",
    "finite_horizon_bounds",
    "parse_ocssg",
    "serialize_ocssg",
    "simulate",
    "validate",
]
__version__ = "0.1.0"
