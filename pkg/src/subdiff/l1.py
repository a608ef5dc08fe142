"""Implicit L1 finite-difference scheme for the Caputo time derivative.

Independent oracle for the spectral path: it shares only the elliptic
assembler.  With r = dt^(-alpha) / Gamma(2 - alpha) and the weights
b_j = (j+1)^(1-alpha) - j^(1-alpha), the Caputo derivative at t_k is
approximated by r * sum_{j=0}^{k-1} b_j (u_{k-j} - u_{k-j-1}), giving
the fully implicit step

    (r I + A) u_k = F_k + r [ sum_{m=1}^{k-1} (b_{m-1} - b_m) u_{k-m}
                              + b_{k-1} u_0 ].

The history weights b_{m-1} - b_m and b_{k-1} are positive, so for
c <= 0 the matrix r I + A is an M-matrix and nonnegative data yield a
nonnegative trajectory step by step.  No reaction shift is applied for
sign-indefinite c; instead positive definiteness of r I + A is checked
through mu_1 + r > 0, which keeps the scheme algorithmically
independent of the fixed-point construction it validates.  Temporal
accuracy is O(dt^(2-alpha)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, eigh_tridiagonal

from .errors import StabilityError, ValidationError
from .spectral import FractionalProblem, SpaceTimeField
from .elliptic import assemble


@dataclass(frozen=True)
class L1Weights:
    """Kernel weights b_j = (j+1)^(1-alpha) - j^(1-alpha), j = 0..K-1."""

    alpha: float
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))


def l1_weights(alpha: float, n_steps: int) -> L1Weights:
    """Weights of the L1 discretisation for n_steps time steps."""
    if not (np.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValidationError(
            f"n_steps must be an integer >= 1, got {n_steps!r}")
    j = np.arange(n_steps, dtype=float)
    b = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    return L1Weights(alpha=alpha, b=b)


def l1_solve(problem: FractionalProblem) -> SpaceTimeField:
    """March the implicit L1 scheme over the full time grid.

    Source is sampled at the new time level (fully implicit coupling).
    Raises StabilityError when r I + A is indefinite, i.e. the time grid
    is too coarse for the negative part of the spectrum.
    """
    grid = problem.elliptic.grid
    time = problem.time
    alpha = problem.alpha
    matrix = assemble(problem.elliptic)

    dt = time.dt
    r = dt ** (-alpha) / math.gamma(2.0 - alpha)
    mu1 = eigh_tridiagonal(matrix.diagonal, matrix.off_diagonal,
                           eigvals_only=True, select="i",
                           select_range=(0, 0))[0]
    if r + mu1 <= 0.0:
        raise StabilityError(
            f"r + mu_1 = {r + mu1:.3e} <= 0: the implicit system is "
            f"indefinite; refine the time grid (larger n_steps)")

    # banded Cholesky of r I + A (upper form)
    n = grid.n_interior
    band = np.zeros((2, n))
    band[0, 1:] = matrix.off_diagonal
    band[1] = matrix.diagonal + r
    factor = cholesky_banded(band)

    b = l1_weights(alpha, time.n_steps).b
    d = b[:-1] - b[1:] if b.size > 1 else np.empty(0)

    values = np.zeros((n, time.n_steps + 1))
    values[:, 0] = problem.initial
    f = problem.source.values
    for k in range(1, time.n_steps + 1):
        hist = b[k - 1] * values[:, 0]
        if k > 1:
            hist = hist + values[:, k - 1:0:-1] @ d[:k - 1]
        rhs = f[:, k] + r * hist
        values[:, k] = cho_solve_banded((factor, False), rhs)
    return SpaceTimeField(values, grid, time)
