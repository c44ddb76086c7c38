"""Stationary states, stability and dynamics of the focusing NLS on the line
with an attractive delta-prime point interaction."""

from .model import (Grid, ModelParams, OutOfRange, QFunction, ValidationError,
                    assemble_profile, functionals, make_params, stationary_residual)
from .ground_state import (Branch, GroundState, TSolution, bifurcation_scan, ground_state,
                           solve_asymmetric, solve_symmetric)

__all__ = [
    "Branch", "Grid", "GroundState", "ModelParams", "OutOfRange", "QFunction", "TSolution",
    "ValidationError", "assemble_profile", "bifurcation_scan", "functionals", "ground_state",
    "make_params", "solve_asymmetric", "solve_symmetric", "stationary_residual",
]

__version__ = "0.1.0"
