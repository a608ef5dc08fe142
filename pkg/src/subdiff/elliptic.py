"""Discrete elliptic operator -(a u')' - c u on an interval.

Homogeneous Dirichlet ends, conservative second-order stencil with the
diffusivity sampled at cell midpoints.  The matrix is symmetric
tridiagonal, so the full eigendecomposition is cheap; eigenvectors are
normalised in the h-weighted inner product (u, v) = h * sum_i u_i v_i,
which is the discrete stand-in for the L2 pairing the solution
operators are written in.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import AccuracyError, ValidationError


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on (0, length) with n_interior strictly interior nodes."""

    length: float
    n_interior: int

    def __post_init__(self):
        if not (np.isfinite(self.length) and self.length > 0.0):
            raise ValidationError(f"length must be > 0, got {self.length!r}")
        if int(self.n_interior) != self.n_interior or self.n_interior < 2:
            raise ValidationError(
                f"n_interior must be an integer >= 2, got {self.n_interior!r}")

    @property
    def h(self) -> float:
        return self.length / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes x_i = i h, i = 1..N."""
        return self.h * np.arange(1, self.n_interior + 1)

    @property
    def midpoints(self) -> np.ndarray:
        """Cell midpoints x_{i+1/2}, i = 0..N (length N + 1)."""
        return self.h * (np.arange(self.n_interior + 1) + 0.5)

    def inner(self, u, v) -> float:
        """h-weighted inner product."""
        return float(self.h * np.dot(np.asarray(u), np.asarray(v)))

    def norm(self, u) -> float:
        return float(np.sqrt(self.h) * np.linalg.norm(np.asarray(u)))


@dataclass(frozen=True)
class EllipticProblem:
    """Coefficients of -(a u')' - c u on a grid.

    diffusivity holds a at the N + 1 cell midpoints, reaction holds c at
    the N interior nodes.  The reaction carries no sign restriction; the
    ellipticity floor mu0 > 0 must bound the diffusivity from below.
    """

    grid: Grid1D
    diffusivity: np.ndarray
    reaction: np.ndarray
    mu0: float = 1e-10

    def __post_init__(self):
        object.__setattr__(
            self, "diffusivity", np.asarray(self.diffusivity, dtype=float))
        object.__setattr__(
            self, "reaction", np.asarray(self.reaction, dtype=float))
        n = self.grid.n_interior
        if self.diffusivity.shape != (n + 1,):
            raise ValidationError(
                f"diffusivity must have shape ({n + 1},), "
                f"got {self.diffusivity.shape}")
        if self.reaction.shape != (n,):
            raise ValidationError(
                f"reaction must have shape ({n},), got {self.reaction.shape}")
        if not (np.isfinite(self.mu0) and self.mu0 > 0.0):
            raise ValidationError(f"mu0 must be > 0, got {self.mu0!r}")
        if not np.all(np.isfinite(self.diffusivity)):
            raise ValidationError("diffusivity must be finite")
        if self.diffusivity.min() < self.mu0:
            raise ValidationError(
                f"diffusivity violates the ellipticity floor: "
                f"min a = {self.diffusivity.min()} < mu0 = {self.mu0}")
        if not np.all(np.isfinite(self.reaction)):
            raise ValidationError("reaction must be finite")


@dataclass(frozen=True)
class OperatorMatrix:
    """Symmetric tridiagonal representation of the discrete operator."""

    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of the discrete operator.

    eigenvalues are sorted ascending; eigenvector n is column n of
    ``eigenvectors`` and is h-orthonormal with its first nonzero
    component positive, which makes the decomposition deterministic.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    grid: Grid1D

    def project(self, f: np.ndarray) -> np.ndarray:
        """Modal coefficients (f, phi_n) in the h-weighted pairing."""
        return self.grid.h * (self.eigenvectors.T @ np.asarray(f, dtype=float))

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal values of sum_n coeffs_n phi_n."""
        return self.eigenvectors @ np.asarray(coeffs, dtype=float)


def assemble(problem: EllipticProblem) -> OperatorMatrix:
    """Build the tridiagonal matrix of -(a u')' - c u with Dirichlet ends.

    Row i reads -(a_{i+1/2}(v_{i+1}-v_i) - a_{i-1/2}(v_i-v_{i-1}))/h^2
    - c_i v_i with v_0 = v_{N+1} = 0.
    """
    h2 = problem.grid.h ** 2
    a = problem.diffusivity
    diag = (a[:-1] + a[1:]) / h2 - problem.reaction
    off = -a[1:-1] / h2
    return OperatorMatrix(diagonal=diag, off_diagonal=off)


def eigendecompose(matrix: OperatorMatrix, grid: Grid1D) -> SpectralDecomposition:
    """Full spectrum of the symmetric tridiagonal operator.

    Eigenvectors are rescaled from the Euclidean to the h-weighted
    normalisation and sign-fixed.
    """
    try:
        vals, vecs = eigh_tridiagonal(matrix.diagonal, matrix.off_diagonal)
    except np.linalg.LinAlgError as exc:
        raise AccuracyError(f"tridiagonal eigensolver failed: {exc}") from exc
    vecs = vecs / np.sqrt(grid.h)
    # first nonzero component positive
    n = vecs.shape[1]
    for j in range(n):
        col = vecs[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if idx.size and col[idx[0]] < 0.0:
            vecs[:, j] = -col
    return SpectralDecomposition(eigenvalues=vals, eigenvectors=vecs, grid=grid)


def shift_reaction(problem: EllipticProblem, sigma: float) -> EllipticProblem:
    """Replace the reaction c(x) by c(x) - sigma."""
    return replace(problem, reaction=problem.reaction - sigma)
