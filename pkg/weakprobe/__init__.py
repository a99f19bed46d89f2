"""
Weak measurements of pre- and post-selected ensembles with mixed probe states.
"""

from .channels import QuantumChannel, apply, compose, is_phase_noise, make_phase_noise
from .core import DensityOperator, Observable, PureState
from .engine import WeakSetup, evolve_exact, monte_carlo, predict_shift, weak_value
from .errors import WeakProbeError

__version__ = "1.0.0"

__all__ = [
    "DensityOperator",
    "Observable",
    "PureState",
    "QuantumChannel",
    "WeakProbeError",
    "WeakSetup",
    "apply",
    "compose",
    "evolve_exact",
    "is_phase_noise",
    "make_phase_noise",
    "monte_carlo",
    "predict_shift",
    "weak_value",
]
