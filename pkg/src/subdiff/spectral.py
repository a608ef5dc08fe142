"""Eigenfunction-expansion solvers for the time-fractional diffusion IBVP.

With the eigenpairs (mu_n, phi_n) of the discrete elliptic operator,
the solution of  d^alpha_t u = -A u + F,  u(0) = a  is

    u(t) = S(t) a + int_0^t K(t-s) F(s) ds,
    S(t) a = sum_n E_{a,1}(-mu_n t^alpha) (a, phi_n) phi_n,
    K(t) a = sum_n t^(alpha-1) E_{a,alpha}(-mu_n t^alpha) (a, phi_n) phi_n.

Sources are treated as piecewise constant in time (left-endpoint
samples), for which the modal convolution has the closed form

    sum_j (F_n(t_j)/mu_n) [E_{a,1}(-mu_n (t_k-t_{j+1})^alpha)
                           - E_{a,1}(-mu_n (t_k-t_j)^alpha)],

a consequence of d/dt E_{a,1}(-mu t^alpha) = -mu t^(alpha-1)
E_{a,alpha}(-mu t^alpha): no quadrature of the weakly singular kernel is
ever needed, and mode-constant sources are integrated exactly.

Sign-indefinite reactions c(x) are handled by the shifted fixed point:
with a shift sigma > max c the operator keeps reaction c - sigma < 0
and the iteration  u_{n+1} = L(a, F + sigma u_n)  starting from u_0 = 0
converges to the solution; every iterate preserves nonnegativity of the
data, which is how the maximum principle survives the sign relaxation.

The shift is sigma = max(c) + 1 when the reaction is anywhere
nonnegative and sigma = 0 otherwise (the construction is unnecessary
when the reaction is already strictly negative, and the iteration then
collapses onto the direct solve).  Two properties of this choice
matter: it is monotone in c, so ordered reactions receive ordered
shifts and the discrete fixed points of ordered problems stay ordered
(the feedback term is sampled piecewise-constant in time, which biases
the fixed point by O(dt^alpha) * sigma/mu, so mismatched shifts would
leak that bias into comparisons); and it vanishes for negative
reactions, which keeps picard_solve consistent with solve_linear to
solver tolerance rather than to discretisation accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from .elliptic import (EllipticProblem, Grid1D, SpectralDecomposition,
                       assemble, eigendecompose, shift_reaction)
from .errors import ConvergenceError, ValidationError
from .mlf import e_alpha_1_profile


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid 0 = t_0 < ... < t_K = horizon."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0.0):
            raise ValidationError(f"horizon must be > 0, got {self.horizon!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError(
                f"n_steps must be an integer >= 1, got {self.n_steps!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass(frozen=True)
class SpaceTimeField:
    """Nodal values u(x_i, t_k) on a space grid x time grid."""

    values: np.ndarray
    grid: Grid1D
    time: TimeGrid

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=float))
        shape = (self.grid.n_interior, self.time.n_steps + 1)
        if self.values.shape != shape:
            raise ValidationError(
                f"field values must have shape {shape}, "
                f"got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must be finite")

    @classmethod
    def zeros(cls, grid: Grid1D, time: TimeGrid) -> "SpaceTimeField":
        return cls(np.zeros((grid.n_interior, time.n_steps + 1)), grid, time)

    @classmethod
    def from_profile(cls, grid: Grid1D, time: TimeGrid,
                     profile) -> "SpaceTimeField":
        """Time-constant field with the given spatial profile."""
        profile = np.asarray(profile, dtype=float)
        values = np.tile(profile[:, None], (1, time.n_steps + 1))
        return cls(values, grid, time)


@dataclass(frozen=True)
class FractionalProblem:
    """The full initial-boundary-value problem on discrete grids."""

    alpha: float
    elliptic: EllipticProblem
    initial: np.ndarray
    source: SpaceTimeField
    time: TimeGrid

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and 0.0 < self.alpha < 1.0):
            raise ValidationError(
                f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(
            self, "initial", np.asarray(self.initial, dtype=float))
        n = self.elliptic.grid.n_interior
        if self.initial.shape != (n,):
            raise ValidationError(
                f"initial data must have shape ({n},), "
                f"got {self.initial.shape}")
        if not np.all(np.isfinite(self.initial)):
            raise ValidationError("initial data must be finite")
        if self.source.grid != self.elliptic.grid or self.source.time != self.time:
            raise ValidationError("source grids do not match the problem")


@dataclass(frozen=True)
class PicardReport:
    """Diagnostics of one shifted fixed-point run.

    ``shift`` is the sigma actually used (0 for strictly negative
    reaction).  residuals[n] = sup_k || u_{n+1}(t_k) - u_n(t_k) ||_h.
    bound_constants = (M0, C): M0 is the sup norm of the first iterate
    and C the generic constant fitted from the first two residuals, so
    the a-priori bound (C Gamma(a) T^a)^(n-1) M0 / Gamma((n-1) a + 1)
    can be reported alongside the observed decay.
    """

    shift: float
    residuals: tuple
    iterations: int
    converged: bool
    bound_constants: tuple
    alpha: float
    horizon: float

    @property
    def residual_ratios(self) -> tuple:
        r = self.residuals
        return tuple(r[i + 1] / r[i] for i in range(len(r) - 1) if r[i] > 0.0)

    def predicted_bounds(self) -> tuple:
        """A-priori bound for each residual (diagnostic only)."""
        m0, c = self.bound_constants
        rho = c * math.gamma(self.alpha) * self.horizon ** self.alpha
        return tuple(
            m0 * rho ** n / math.gamma(n * self.alpha + 1.0)
            for n in range(len(self.residuals)))


class _ModalSystem:
    """Per-mode Mittag-Leffler tables for one decomposition and time grid.

    E1[n, j] = E_{a,1}(-mu_n t_j^alpha); D[n, m] holds the exact modal
    integral of the kernel over one step at lag m, so the source
    convolution is a discrete convolution along the time axis.
    """

    def __init__(self, decomp: SpectralDecomposition, alpha: float,
                 time: TimeGrid):
        mu = decomp.eigenvalues
        if mu.min() <= 0.0:
            raise ValidationError(
                "decomposition has a nonpositive eigenvalue; it must come "
                "from a strictly negative-reaction (shifted) operator")
        ta = time.nodes ** alpha
        e1 = np.empty((mu.size, ta.size))
        for n in range(mu.size):
            e1[n] = e_alpha_1_profile(alpha, mu[n] * ta)
        self.mu = mu
        self.E1 = e1
        self.D = np.zeros_like(e1)
        self.D[:, 1:] = (e1[:, :-1] - e1[:, 1:]) / mu[:, None]
        self._nfft = next_fast_len(2 * time.n_steps + 1)
        self._Dhat = rfft(self.D, self._nfft, axis=1)

    def convolve(self, coeffs: np.ndarray) -> np.ndarray:
        """(coeffs * D)[n, k] = sum_{j<k} coeffs[n, j] D[n, k-j]."""
        k1 = coeffs.shape[1]
        out = irfft(rfft(coeffs, self._nfft, axis=1) * self._Dhat,
                    self._nfft, axis=1)
        return out[:, :k1]


def apply_S(decomp: SpectralDecomposition, alpha: float, t: float,
            a: np.ndarray) -> np.ndarray:
    """Propagate initial data: sum_n E_{a,1}(-mu_n t^alpha)(a, phi_n) phi_n."""
    if not (np.isfinite(t) and t >= 0.0):
        raise ValidationError(f"t must be finite and >= 0, got {t!r}")
    if decomp.eigenvalues.min() <= 0.0:
        raise ValidationError(
            "apply_S needs a positive spectrum (shifted operator)")
    coeffs = decomp.project(a)
    factors = e_alpha_1_profile(alpha, decomp.eigenvalues * t ** alpha)
    return decomp.reconstruct(coeffs * factors)


def convolve_K(decomp: SpectralDecomposition, alpha: float, time: TimeGrid,
               F: SpaceTimeField) -> SpaceTimeField:
    """Source response int_0^{t_k} K(t_k - s) F(s) ds, F piecewise constant.

    Exact per mode for the left-endpoint piecewise-constant interpolant.
    """
    system = _ModalSystem(decomp, alpha, time)
    coeffs = decomp.project(F.values)
    w = system.convolve(coeffs)
    return SpaceTimeField(decomp.reconstruct(w), F.grid, time)


def solve_linear(problem: FractionalProblem) -> SpaceTimeField:
    """Direct solve u = S(t) a + K * F for strictly negative reaction."""
    if problem.elliptic.reaction.max() >= 0.0:
        raise ValidationError(
            "solve_linear requires reaction < 0 everywhere; "
            "use picard_solve for sign-indefinite coefficients")
    decomp = eigendecompose(assemble(problem.elliptic), problem.elliptic.grid)
    system = _ModalSystem(decomp, problem.alpha, problem.time)
    a0 = decomp.project(problem.initial)
    cf = decomp.project(problem.source.values)
    u = a0[:, None] * system.E1 + system.convolve(cf)
    return SpaceTimeField(decomp.reconstruct(u),
                          problem.elliptic.grid, problem.time)


def _column_sup_norm(delta: np.ndarray) -> float:
    """sup over grid times of the h-weighted L2 norm, in modal coords."""
    return float(np.sqrt((delta * delta).sum(axis=0)).max())


def _report(shift, residuals, converged, m0, alpha, horizon) -> PicardReport:
    if m0 > 0.0 and len(residuals) >= 2:
        c_est = residuals[1] * math.gamma(alpha + 1.0) / (
            math.gamma(alpha) * horizon ** alpha * m0)
    else:
        c_est = 0.0
    return PicardReport(shift=shift, residuals=tuple(residuals),
                        iterations=len(residuals), converged=converged,
                        bound_constants=(m0, c_est), alpha=alpha,
                        horizon=horizon)


def picard_solve(problem: FractionalProblem, tol: float = 1e-10,
                 max_iter: int = 100, shift: float | None = None):
    """Shifted fixed-point solve for arbitrary bounded reaction.

    ``shift`` defaults to the smallest valid construction value (0 for
    strictly negative reaction, max(c) + 1 otherwise).  An explicit
    value may be passed as long as it is nonnegative and exceeds
    max(c); solves that will be compared pointwise against each other
    should share one shift, since the discrete fixed point carries an
    O(dt) feedback-sampling bias proportional to it.

    Returns (field, PicardReport); raises ConvergenceError (carrying the
    report and last iterate) if the residual never reaches tol.
    """
    if not (np.isfinite(tol) and tol > 0.0):
        raise ValidationError(f"tol must be > 0, got {tol!r}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter!r}")
    max_c = float(problem.elliptic.reaction.max())
    if shift is None:
        shift = 0.0 if max_c < 0.0 else max_c + 1.0
    elif not (np.isfinite(shift) and shift >= 0.0 and shift > max_c):
        raise ValidationError(
            f"shift must be >= 0 and exceed max(reaction) = {max_c}, "
            f"got {shift!r}")
    shifted = shift_reaction(problem.elliptic, shift)
    grid = problem.elliptic.grid
    decomp = eigendecompose(assemble(shifted), grid)
    system = _ModalSystem(decomp, problem.alpha, problem.time)

    a0 = decomp.project(problem.initial)
    cf = decomp.project(problem.source.values)
    ua = a0[:, None] * system.E1

    u = np.zeros_like(ua)
    residuals = []
    m0 = 0.0
    converged = False
    for it in range(max_iter):
        u_next = ua + system.convolve(cf + shift * u)
        residuals.append(_column_sup_norm(u_next - u))
        u = u_next
        if it == 0:
            m0 = _column_sup_norm(u)
        if residuals[-1] <= tol:
            converged = True
            break

    report = _report(shift, residuals, converged, m0,
                     problem.alpha, problem.time.horizon)
    field = SpaceTimeField(decomp.reconstruct(u), grid, problem.time)
    if not converged:
        raise ConvergenceError(
            f"Picard iteration did not reach tol={tol} within "
            f"{max_iter} iterations (last residual {residuals[-1]:.3e})",
            report=report, result=field)
    return field, report


def _normalize_coupling(coupling, n_species: int, n_nodes: int) -> np.ndarray:
    p = np.asarray(coupling, dtype=float)
    if p.shape == (n_species, n_species):
        p = np.repeat(p[:, :, None], n_nodes, axis=2)
    if p.shape != (n_species, n_species, n_nodes):
        raise ValidationError(
            f"coupling must have shape ({n_species}, {n_species}) or "
            f"({n_species}, {n_species}, {n_nodes}), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("coupling coefficients must be finite")
    for i in range(n_species):
        for j in range(n_species):
            if i != j and p[i, j].min() < 0.0:
                raise ValidationError(
                    f"off-diagonal coupling p[{i}][{j}] must be >= 0")
    return p


def solve_coupled(problems: Sequence[FractionalProblem], coupling,
                  tol: float = 1e-10, max_iter: int = 100):
    """Coupled-system solve with nonnegative off-diagonal coupling.

    Every species shares the grid, time grid, order and diffusivity and
    must carry zero reaction: the whole zeroth-order term, diagonal
    included, lives in ``coupling``.  The iteration keeps a single
    constant-reaction operator (-sigma with sigma = 1 + max row sum of
    |p|) and moves sigma u_i + sum_j p_ij u_j into the source.

    Returns (fields, PicardReport).
    """
    problems = list(problems)
    if not problems:
        raise ValidationError("at least one species is required")
    if not (np.isfinite(tol) and tol > 0.0):
        raise ValidationError(f"tol must be > 0, got {tol!r}")
    head = problems[0]
    grid, time, alpha = head.elliptic.grid, head.time, head.alpha
    for k, pr in enumerate(problems):
        if pr.elliptic.grid != grid or pr.time != time:
            raise ValidationError(f"species {k} uses a different grid")
        if pr.alpha != alpha:
            raise ValidationError(f"species {k} uses a different alpha")
        if not np.array_equal(pr.elliptic.diffusivity,
                              head.elliptic.diffusivity):
            raise ValidationError(f"species {k} uses a different diffusivity")
        if np.any(pr.elliptic.reaction != 0.0):
            raise ValidationError(
                f"species {k} has a nonzero reaction; fold it into the "
                f"coupling diagonal")
    ns, n = len(problems), grid.n_interior
    p = _normalize_coupling(coupling, ns, n)

    sigma = 1.0 + float(np.abs(p).sum(axis=1).max())
    base = EllipticProblem(grid=grid, diffusivity=head.elliptic.diffusivity,
                           reaction=np.full(n, -sigma),
                           mu0=head.elliptic.mu0)
    decomp = eigendecompose(assemble(base), grid)
    system = _ModalSystem(decomp, alpha, time)

    ua = [decomp.project(pr.initial)[:, None] * system.E1 for pr in problems]
    cf = [decomp.project(pr.source.values) for pr in problems]

    u = [np.zeros_like(ua[0]) for _ in range(ns)]
    residuals = []
    m0 = 0.0
    converged = False
    for it in range(max_iter):
        nodal = [decomp.reconstruct(ui) for ui in u]
        u_next = []
        for i in range(ns):
            src = sigma * nodal[i]
            for j in range(ns):
                src += p[i, j][:, None] * nodal[j]
            u_next.append(ua[i] + system.convolve(cf[i] + decomp.project(src)))
        residuals.append(max(_column_sup_norm(u_next[i] - u[i])
                             for i in range(ns)))
        u = u_next
        if it == 0:
            m0 = max(_column_sup_norm(ui) for ui in u)
        if residuals[-1] <= tol:
            converged = True
            break

    report = _report(sigma, residuals, converged, m0, alpha, time.horizon)
    fields = [SpaceTimeField(decomp.reconstruct(ui), grid, time) for ui in u]
    if not converged:
        raise ConvergenceError(
            f"coupled Picard iteration did not reach tol={tol} within "
            f"{max_iter} iterations (last residual {residuals[-1]:.3e})",
            report=report, result=fields)
    return fields, report
