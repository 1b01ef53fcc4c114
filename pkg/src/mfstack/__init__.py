"""Stacked multifidelity physics-informed networks and operator networks."""

from . import autodiff
from . import networks
from . import oracles
from . import problems
from . import stacking
from . import ntk
from . import training
from . import config

__all__ = [
    "autodiff",
    "networks",
    "oracles",
    "problems",
    "stacking",
    "ntk",
    "training",
    "config",
]

__version__ = "0.1.0"
