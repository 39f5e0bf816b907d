"""Active structure from motion for 3D lines.

Modules: :mod:`geometry` (Plücker lines and the reduced state),
:mod:`dynamics`, :mod:`observer`, :mod:`control`, :mod:`sim` (closed-loop
runs and Monte Carlo), :mod:`output` and :mod:`report` (files and figures),
and :mod:`cli`.
"""
from .config import RunConfig, parse_config
from .errors import (
    ConfigError,
    DegenerateLineError,
    DepthOverflowError,
    EliminationSingularityError,
    InvalidLineError,
    LineSfMError,
    ScenarioError,
)
from .geometry import Axis, PluckerLine, ReducedState, binormalize, recover, reduce

__version__ = "0.1.0"

__all__ = [
    "Axis", "ConfigError", "DegenerateLineError", "DepthOverflowError",
    "EliminationSingularityError", "InvalidLineError", "LineSfMError", "PluckerLine",
    "ReducedState", "RunConfig", "ScenarioError", "binormalize", "parse_config",
    "recover", "reduce",
]
