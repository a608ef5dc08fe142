"""Randomized property checks for the maximum-principle family.

Each check turns one of the solution-sign theorems into a pass/fail
report over an ensemble of randomly generated problems: nonnegativity
of the solution for nonnegative data and arbitrary bounded reaction,
pointwise comparison of ordered data, monotonicity in the reaction
coefficient, eventual positivity, and nonnegativity of coupled-system
components.

Problems are deterministic functions of (seed, trial index) through
NumPy's PCG64 generator, so any violation can be replayed in isolation
from the context recorded in the report.  Coefficient fields are
low-frequency trigonometric combinations (squared where nonnegativity
is required) so the discrete solutions stay well resolved on the
default grids.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticProblem, Grid1D
from .errors import SubdiffError
from .spectral import (FractionalProblem, SpaceTimeField, TimeGrid,
                       picard_solve, solve_coupled)

__all__ = [
    "TrialConfig", "PropertyReport", "gen_problem",
    "check_maximum_principle", "check_comparison", "check_c_monotonicity",
    "check_eventual_positivity", "check_coupled_nonnegativity", "run_all",
    "trig_field",
]


@dataclass(frozen=True)
class TrialConfig:
    """Knobs of the randomized ensembles.

    Violation threshold for a solution u is eps_abs + eps_rel * ||u||_inf.
    ``nonpositive_cap`` is the per-node allowance of nonpositive sampled
    times in the eventual-positivity check (0 for generic data).
    """

    n_trials: int = 200
    alpha_set: tuple = (0.25, 0.5, 0.75)
    n_interior: int = 128
    n_steps: int = 64
    length: float = 1.0
    horizon: float = 1.0
    c_max: float = 10.0
    seed: int = 20170
    eps_abs: float = 1e-10
    eps_rel: float = 1e-8
    picard_tol: float = 1e-10
    max_iter: int = 120
    coupling_max: float = 2.0
    nonpositive_cap: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not all(0.0 < a < 1.0 for a in self.alpha_set):
            raise ValueError("every alpha must lie in (0, 1)")
        if self.c_max < 0.0:
            raise ValueError("c_max must be >= 0")


@dataclass
class PropertyReport:
    """Outcome of one randomized property check."""

    name: str
    trials: int
    violation_count: int
    worst_violation: float
    offenders: list
    passed: bool
    runtime: float
    solver_failures: list = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = (f"{status} {self.name}: {self.trials} trials, "
                f"{self.violation_count} violations")
        if self.violation_count:
            line += f" (worst {self.worst_violation:.3e})"
        if self.solver_failures:
            line += f", {len(self.solver_failures)} solver failures"
        line += f" [{self.runtime:.1f}s]"
        return line


def trig_field(rng: np.random.Generator, x: np.ndarray, length: float,
                modes: int = 3) -> np.ndarray:
    """Random low-frequency field with values in [-1, 1]."""
    coeff = rng.uniform(-1.0, 1.0, modes)
    phase = rng.uniform(0.0, 2.0 * np.pi, modes)
    k = np.arange(1, modes + 1)
    raw = np.sin(np.pi * np.outer(k, x) / length + phase[:, None])
    out = coeff @ raw
    return out / (np.abs(coeff).sum() + 1e-30)


def _nonneg_field(rng, x, length, amplitude=1.0, modes=3):
    return amplitude * trig_field(rng, x, length, modes) ** 2


def _rng_for(config: TrialConfig, trial: int, stream: int = 0):
    return np.random.default_rng([config.seed, stream, trial])


def _grids(config: TrialConfig):
    return (Grid1D(config.length, config.n_interior),
            TimeGrid(config.horizon, config.n_steps))


def _pick_alpha(rng, config):
    return float(config.alpha_set[rng.integers(len(config.alpha_set))])


def _random_elliptic(rng, grid, config) -> EllipticProblem:
    diffusivity = 1.5 + 0.5 * trig_field(rng, grid.midpoints, grid.length)
    reaction = config.c_max * trig_field(rng, grid.nodes, grid.length)
    return EllipticProblem(grid, diffusivity, reaction)


def _random_source(rng, grid, time, amplitude=1.0) -> SpaceTimeField:
    profile = _nonneg_field(rng, grid.nodes, grid.length, amplitude)
    tmod = _nonneg_field(rng, time.nodes, time.horizon, 1.0, modes=2)
    return SpaceTimeField(profile[:, None] * (0.5 + tmod[None, :]),
                          grid, time)


def gen_problem(seed: int, config: TrialConfig) -> FractionalProblem:
    """Deterministic random problem: diffusivity in [1, 2], reaction in
    [-c_max, c_max], nonnegative initial data and source (squares of
    random fields)."""
    rng = np.random.default_rng([config.seed, seed])
    grid, time = _grids(config)
    elliptic = _random_elliptic(rng, grid, config)
    initial = _nonneg_field(rng, grid.nodes, grid.length)
    source = _random_source(rng, grid, time)
    return FractionalProblem(_pick_alpha(rng, config), elliptic,
                             initial, source, time)


def _tolerance(config: TrialConfig, u: np.ndarray) -> float:
    return config.eps_abs + config.eps_rel * np.abs(u).max()


def _run_trials(name, config, one_trial):
    """Shared driver: run one_trial(i) -> list of violation dicts."""
    start = _time.perf_counter()
    offenders = []
    failures = []
    worst = 0.0
    for i in range(config.n_trials):
        try:
            for v in one_trial(i):
                offenders.append(v)
                worst = max(worst, v["magnitude"])
        except SubdiffError as exc:
            failures.append({"trial": i, "error": f"{type(exc).__name__}: {exc}"})
    offenders.sort(key=lambda v: v["trial"])
    return PropertyReport(
        name=name, trials=config.n_trials, violation_count=len(offenders),
        worst_violation=worst, offenders=offenders,
        passed=not offenders, runtime=_time.perf_counter() - start,
        solver_failures=failures)


def _negativity_violations(config, trial, u, tol, what="u"):
    out = []
    bad = u.values < -tol
    if bad.any():
        i, k = np.unravel_index(np.argmin(u.values), u.values.shape)
        out.append({
            "trial": trial, "seed": [config.seed, trial],
            "magnitude": float(-u.values.min()), "what": what,
            "node": int(i), "time_index": int(k),
        })
    return out


def check_maximum_principle(config: TrialConfig) -> PropertyReport:
    """Nonnegative data + arbitrary bounded reaction => nonnegative u."""

    def one(i):
        problem = gen_problem(i, config)
        u, _ = picard_solve(problem, config.picard_tol, config.max_iter)
        return _negativity_violations(config, i, u, _tolerance(config, u.values))

    return _run_trials("maximum_principle", config, one)


def check_comparison(config: TrialConfig) -> PropertyReport:
    """Ordered data (a1 >= a2, F1 >= F2, same c) => ordered solutions."""

    def one(i):
        problem = gen_problem(i, config)
        rng = _rng_for(config, i, stream=1)
        grid, time = problem.elliptic.grid, problem.time
        bump_a = _nonneg_field(rng, grid.nodes, grid.length, 0.5)
        bump_f = _nonneg_field(rng, grid.nodes, grid.length, 0.5)
        # F bump supported on a random subinterval
        lo, hi = np.sort(rng.uniform(0.0, grid.length, 2))
        window = (grid.nodes >= lo) & (grid.nodes <= hi)
        fbig = problem.source.values + (bump_f * window)[:, None]
        upper = FractionalProblem(
            problem.alpha, problem.elliptic, problem.initial + bump_a,
            SpaceTimeField(fbig, grid, time), time)
        u1, _ = picard_solve(upper, config.picard_tol, config.max_iter)
        u2, _ = picard_solve(problem, config.picard_tol, config.max_iter)
        diff = SpaceTimeField(u1.values - u2.values, grid, time)
        tol = config.eps_abs + config.eps_rel * max(
            np.abs(u1.values).max(), np.abs(u2.values).max())
        return _negativity_violations(config, i, diff, tol, what="u1-u2")

    return _run_trials("comparison", config, one)


def check_c_monotonicity(config: TrialConfig) -> PropertyReport:
    """c1 >= c2 with fixed nonnegative data => u_{c1} >= u_{c2}."""

    def one(i):
        problem = gen_problem(i, config)
        rng = _rng_for(config, i, stream=2)
        grid, time = problem.elliptic.grid, problem.time
        bump_c = _nonneg_field(rng, grid.nodes, grid.length, 2.0)
        bigger = EllipticProblem(grid, problem.elliptic.diffusivity,
                                 problem.elliptic.reaction + bump_c,
                                 problem.elliptic.mu0)
        upper = FractionalProblem(problem.alpha, bigger, problem.initial,
                                  problem.source, time)
        u1, _ = picard_solve(upper, config.picard_tol, config.max_iter)
        u2, _ = picard_solve(problem, config.picard_tol, config.max_iter)
        diff = SpaceTimeField(u1.values - u2.values, grid, time)
        tol = config.eps_abs + config.eps_rel * max(
            np.abs(u1.values).max(), np.abs(u2.values).max())
        return _negativity_violations(config, i, diff, tol, what="u_c1-u_c2")

    return _run_trials("c_monotonicity", config, one)


def check_eventual_positivity(config: TrialConfig) -> PropertyReport:
    """For a >= 0 generic, F = 0: u(x, t_k) > 0 at all sampled t_k > 0.

    Soft empirical analogue of the finite-nonpositivity-set statement:
    per interior node the count of nonpositive sampled times (t_k >=
    dt) must not exceed ``nonpositive_cap``.
    """

    def one(i):
        rng = np.random.default_rng([config.seed, 3, i])
        grid, time = _grids(config)
        elliptic = _random_elliptic(rng, grid, config)
        # generic nonnegative profile, bounded away from 0 on a subinterval
        initial = _nonneg_field(rng, grid.nodes, grid.length)
        center = rng.uniform(0.3, 0.7) * grid.length
        initial = initial + np.exp(
            -((grid.nodes - center) / (0.15 * grid.length)) ** 2)
        problem = FractionalProblem(
            _pick_alpha(rng, config), elliptic, initial,
            SpaceTimeField.zeros(grid, time), time)
        u, _ = picard_solve(problem, config.picard_tol, config.max_iter)
        counts = (u.values[:, 1:] <= 0.0).sum(axis=1)
        out = []
        if counts.max() > config.nonpositive_cap:
            node = int(counts.argmax())
            out.append({
                "trial": i, "seed": [config.seed, 3, i],
                "magnitude": float(counts.max()), "what": "nonpositive count",
                "node": node,
                "time_index": int(np.argmax(u.values[node, 1:] <= 0.0) + 1),
            })
        return out

    return _run_trials("eventual_positivity", config, one)


def check_coupled_nonnegativity(config: TrialConfig) -> PropertyReport:
    """Coupled system, p_ij >= 0 off-diagonal, nonnegative data =>
    every component stays nonnegative."""

    def one(i):
        rng = np.random.default_rng([config.seed, 4, i])
        grid, time = _grids(config)
        n_species = int(rng.integers(2, 4))
        diffusivity = 1.5 + 0.5 * trig_field(rng, grid.midpoints, grid.length)
        alpha = _pick_alpha(rng, config)
        zero_reaction = np.zeros(grid.n_interior)
        problems = []
        for _ in range(n_species):
            ell = EllipticProblem(grid, diffusivity, zero_reaction)
            initial = _nonneg_field(rng, grid.nodes, grid.length)
            source = _random_source(rng, grid, time, 0.5)
            problems.append(
                FractionalProblem(alpha, ell, initial, source, time))
        p = np.empty((n_species, n_species, grid.n_interior))
        for a in range(n_species):
            for b in range(n_species):
                if a == b:
                    p[a, b] = config.coupling_max * trig_field(
                        rng, grid.nodes, grid.length)
                else:
                    p[a, b] = _nonneg_field(rng, grid.nodes, grid.length,
                                            config.coupling_max)
        fields, _ = solve_coupled(problems, p, config.picard_tol,
                                  config.max_iter)
        out = []
        for s, u in enumerate(fields):
            tol = _tolerance(config, u.values)
            for v in _negativity_violations(config, i, u, tol,
                                            what=f"component {s}"):
                v["seed"] = [config.seed, 4, i]
                out.append(v)
        return out

    return _run_trials("coupled_nonnegativity", config, one)


def run_all(config: TrialConfig) -> list:
    """Run every property check with its own trial budget scaled from
    the shared config."""
    from dataclasses import replace

    pair_cfg = replace(config, n_trials=max(1, config.n_trials // 2))
    coupled_cfg = replace(config, n_trials=max(1, config.n_trials // 4))
    return [
        check_maximum_principle(config),
        check_comparison(pair_cfg),
        check_c_monotonicity(pair_cfg),
        check_eventual_positivity(coupled_cfg),
        check_coupled_nonnegativity(coupled_cfg),
    ]
