"""Numerical laboratory for the fractional stochastic heat equation with spatially correlated noise.

Modules
-------
kernel    stable Green kernel on a periodic lattice
noise     spectral measures, the Hilbert space H and noise sampling
fields    deterministic and perturbed solvers, Hölder norms
skeleton  skeleton and controlled equations
rate      rate function, tail slopes and regularity checks
cli       command line and configuration
"""

from .errors import FracSHEError, ValidationError
from .fields import (CoefficientSpec, HolderSpec, SpaceTimeField, coefficients, holder_norm,
                     solve_deterministic, solve_spde)
from .grid import GridSpec
from .kernel import StableParams, green_on_grid, symbol, validate_params
from .noise import SpectralMeasure, check_integrability, j_function, j_integral
from .rate import RateResult, mdp_slope_linear, rate_endpoint
from .skeleton import ControlPath, solve_controlled, solve_skeleton
from .speed import SpeedSpec, validate_speed

__version__ = "0.1.0"

__all__ = [
    "ControlPath", "CoefficientSpec", "FracSHEError", "GridSpec", "HolderSpec", "RateResult",
    "SpaceTimeField", "SpectralMeasure", "SpeedSpec", "StableParams", "ValidationError",
    "check_integrability", "coefficients", "green_on_grid", "holder_norm", "j_function",
    "j_integral", "mdp_slope_linear", "rate_endpoint", "solve_controlled", "solve_deterministic",
    "solve_skeleton", "solve_spde", "symbol", "validate_params", "validate_speed",
]
