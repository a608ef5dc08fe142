"""Numerical laboratory for the 1-D time-fractional diffusion equation.

Solves the Dirichlet initial-boundary-value problem with a Caputo time
derivative of order alpha in (0, 1) by eigenfunction expansion, handles
sign-indefinite reaction coefficients through a shifted Picard fixed
point, cross-checks against an implicit L1 finite-difference scheme,
and empirically verifies maximum/comparison/monotonicity principles on
randomized problem ensembles.
"""

from .elliptic import (EllipticProblem, Grid1D, OperatorMatrix,
                       SpectralDecomposition, assemble, eigendecompose,
                       shift_reaction)
from .errors import (AccuracyError, ConvergenceError, StabilityError,
                     SubdiffError, ValidationError)
from .l1 import L1Weights, l1_solve, l1_weights
from .mlf import MlfParams, mlf_e_alpha_1, mlf_eval
from .spectral import (FractionalProblem, PicardReport, SpaceTimeField,
                       TimeGrid, apply_S, convolve_K, picard_solve,
                       solve_coupled, solve_linear)

__all__ = [
    "AccuracyError", "ConvergenceError", "StabilityError", "SubdiffError",
    "ValidationError",
    "MlfParams", "mlf_eval", "mlf_e_alpha_1",
    "Grid1D", "EllipticProblem", "OperatorMatrix", "SpectralDecomposition",
    "assemble", "eigendecompose", "shift_reaction",
    "TimeGrid", "SpaceTimeField", "FractionalProblem", "PicardReport",
    "apply_S", "convolve_K", "solve_linear", "picard_solve", "solve_coupled",
    "L1Weights", "l1_weights", "l1_solve",
]

__version__ = "0.1.0"
