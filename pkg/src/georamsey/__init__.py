"""Geometric Ramsey interferometry with a resonant tripod scheme."""

from .analysis import decoherence_time, fit_cosine, fit_damped_cosine, polar_angle
from .baremodel import propagate_family
from .core import (BeamGeometry, ConvergenceError, DomainError, PulseSchedule, SpeciesConstants,
                   strontium87)
from .darkspace import propagate_dark
from .ensemble import ensemble_average, thermal_grid
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BeamGeometry", "ConvergenceError", "DomainError", "PulseSchedule", "SpeciesConstants",
    "decoherence_time", "ensemble_average", "fit_cosine", "fit_damped_cosine", "polar_angle",
    "propagate_dark", "propagate_family", "strontium87", "thermal_grid",
]
