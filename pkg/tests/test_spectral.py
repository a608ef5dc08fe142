"""Tests for the eigenfunction-expansion solvers.

The kernel convolution is checked against adaptive quadrature of
int_0^t s^(alpha-1) E_{alpha,alpha}(-mu s^alpha) ds with the algebraic
endpoint singularity handled by the quadrature weight, which is an
independent route to the same modal response.
"""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import solve_banded

from subdiff.elliptic import (EllipticProblem, Grid1D, assemble,
                              eigendecompose, shift_reaction)
from subdiff.errors import ConvergenceError, ValidationError
from subdiff.mlf import MlfParams, mlf_e_alpha_1, mlf_eval
from subdiff.spectral import (FractionalProblem, SpaceTimeField, TimeGrid,
                              apply_S, convolve_K, picard_solve,
                              solve_coupled, solve_linear)


def setup_problem(n=64, alpha=0.5, reaction=-1.0, n_steps=64, horizon=1.0,
                  length=1.0, diffusivity=None, seed=None):
    grid = Grid1D(length, n)
    if diffusivity is None:
        diffusivity = np.ones(n + 1)
    if np.isscalar(reaction):
        reaction = np.full(n, float(reaction))
    ell = EllipticProblem(grid, diffusivity, reaction)
    time = TimeGrid(horizon, n_steps)
    return ell, time


def decompose(ell):
    return eigendecompose(assemble(ell), ell.grid)


class TestApplyS:
    def test_identity_at_t0(self):
        ell, _ = setup_problem()
        dec = decompose(ell)
        rng = np.random.default_rng(0)
        a = rng.uniform(-1, 1, 64)
        np.testing.assert_allclose(apply_S(dec, 0.5, 0.0, a), a, atol=1e-10)

    def test_single_mode(self):
        ell, _ = setup_problem()
        dec = decompose(ell)
        phi1, mu1 = dec.eigenvectors[:, 0], dec.eigenvalues[0]
        t = 0.7
        out = apply_S(dec, 0.5, t, phi1)
        factor = mlf_e_alpha_1(0.5, mu1 * t ** 0.5)
        np.testing.assert_allclose(out, factor * phi1, atol=1e-12)

    def test_erfc_amplitude_at_unit_argument(self):
        # choose t so that mu1 t^alpha = 1
        ell, _ = setup_problem(alpha=0.5)
        dec = decompose(ell)
        mu1 = dec.eigenvalues[0]
        t = (1.0 / mu1) ** 2.0
        out = apply_S(dec, 0.5, t, dec.eigenvectors[:, 0])
        amp = out[np.abs(dec.eigenvectors[:, 0]).argmax()] / \
            dec.eigenvectors[:, 0][np.abs(dec.eigenvectors[:, 0]).argmax()]
        assert amp == pytest.approx(0.4275835761558070, rel=1e-10)

    def test_requires_positive_spectrum(self):
        ell, _ = setup_problem(reaction=+100.0)  # indefinite operator
        dec = decompose(ell)
        with pytest.raises(ValidationError):
            apply_S(dec, 0.5, 1.0, np.ones(64))


class TestConvolveK:
    def test_zero_source(self):
        ell, time = setup_problem()
        dec = decompose(ell)
        out = convolve_K(dec, 0.5, time, SpaceTimeField.zeros(ell.grid, time))
        assert np.all(out.values == 0.0)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_mode_constant_source_closed_form(self, alpha):
        ell, time = setup_problem(alpha=alpha)
        dec = decompose(ell)
        phi1, mu1 = dec.eigenvectors[:, 0], dec.eigenvalues[0]
        F = SpaceTimeField.from_profile(ell.grid, time, phi1)
        out = convolve_K(dec, alpha, time, F)
        for k in (1, 7, 32, 64):
            t = time.nodes[k]
            expected = (1.0 - mlf_e_alpha_1(alpha, mu1 * t ** alpha)) / mu1
            got = ell.grid.inner(out.values[:, k], phi1)
            assert got == pytest.approx(expected, rel=1e-11, abs=1e-13)

    @pytest.mark.parametrize("alpha,mu", [(0.5, 11.0), (0.75, 3.0),
                                          (0.25, 2.0)])
    def test_against_quadrature_oracle(self, alpha, mu):
        # independent oracle: adaptive quadrature of the kernel with the
        # s^(alpha-1) singularity delegated to the quadrature weight
        params = MlfParams(alpha, alpha)
        for t in (0.25, 1.0):
            oracle, err = quad(
                lambda s: mlf_eval(params, -mu * s ** alpha),
                0.0, t, weight="alg", wvar=(alpha - 1.0, 0.0),
                epsabs=1e-12, epsrel=1e-12, limit=200)
            assert err < 1e-9
            closed = (1.0 - mlf_e_alpha_1(alpha, mu * t ** alpha)) / mu
            assert closed == pytest.approx(oracle, abs=1e-8)

    def test_single_step_source_decays(self):
        ell, time = setup_problem(n_steps=128, alpha=0.5)
        dec = decompose(ell)
        values = np.zeros((64, 129))
        values[:, 0] = dec.eigenvectors[:, 0]  # active on [0, dt) only
        out = convolve_K(dec, 0.5, time, SpaceTimeField(values, ell.grid, time))
        mode = ell.grid.h * (dec.eigenvectors[:, 0] @ out.values)
        assert abs(mode[-1]) < abs(mode[2])
        assert abs(mode[-1]) < 2e-3

    def test_rejects_indefinite_spectrum(self):
        ell, time = setup_problem(reaction=+100.0)
        dec = decompose(ell)
        with pytest.raises(ValidationError):
            convolve_K(dec, 0.5, time, SpaceTimeField.zeros(ell.grid, time))


class TestSolveLinear:
    def test_zero_data(self):
        ell, time = setup_problem()
        prob = FractionalProblem(0.5, ell, np.zeros(64),
                                 SpaceTimeField.zeros(ell.grid, time), time)
        u = solve_linear(prob)
        assert np.all(u.values == 0.0)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    def test_single_mode_trajectory(self, alpha):
        ell, time = setup_problem(alpha=alpha)
        dec = decompose(ell)
        phi1, mu1 = dec.eigenvectors[:, 0], dec.eigenvalues[0]
        prob = FractionalProblem(alpha, ell, phi1,
                                 SpaceTimeField.zeros(ell.grid, time), time)
        u = solve_linear(prob)
        exact = np.array([mlf_e_alpha_1(alpha, mu1 * t ** alpha)
                          for t in time.nodes])
        np.testing.assert_allclose(u.values, phi1[:, None] * exact[None, :],
                                   atol=1e-10)

    def test_rejects_sign_indefinite_reaction(self):
        ell, time = setup_problem(reaction=0.0)
        prob = FractionalProblem(0.5, ell, np.ones(64),
                                 SpaceTimeField.zeros(ell.grid, time), time)
        with pytest.raises(ValidationError, match="picard"):
            solve_linear(prob)

    def test_sign_preservation_lemma(self):
        # a >= 0, F >= 0, c < 0 => u >= 0 up to rounding
        rng = np.random.default_rng(42)
        for trial in range(5):
            n = 80
            ell, time = setup_problem(
                n=n, reaction=-rng.uniform(0.5, 3.0, n),
                diffusivity=rng.uniform(1, 2, n + 1), n_steps=48)
            a = rng.uniform(0, 1, n) ** 2
            f = rng.uniform(0, 1, n) ** 2
            prob = FractionalProblem(0.5, ell, a,
                                     SpaceTimeField.from_profile(
                                         ell.grid, time, f), time)
            u = solve_linear(prob)
            scale = np.abs(u.values).max()
            assert u.values.min() >= -1e-8 * scale

    def test_linearity(self):
        rng = np.random.default_rng(3)
        n = 50
        ell, time = setup_problem(n=n, reaction=-2.0, n_steps=32)
        a1, a2 = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        f1, f2 = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)

        def solve(a, f):
            return solve_linear(FractionalProblem(
                0.6, ell, a, SpaceTimeField.from_profile(ell.grid, time, f),
                time)).values

        lhs = solve(a1 + a2, f1 + f2)
        rhs = solve(a1, f1) + solve(a2, f2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_steady_state_limit(self):
        # constant source, zero initial data, c = -1, T = 100:
        # u(T) matches A^-1 f within the per-mode predicted residual
        n = 64
        ell, time = setup_problem(n=n, reaction=-1.0, horizon=100.0,
                                  n_steps=128)
        rng = np.random.default_rng(9)
        f = rng.uniform(0.0, 1.0, n)
        prob = FractionalProblem(
            0.5, ell, np.zeros(n),
            SpaceTimeField.from_profile(ell.grid, time, f), time)
        u_final = solve_linear(prob).values[:, -1]

        m = assemble(ell)
        ab = np.zeros((3, n))
        ab[0, 1:] = m.off_diagonal
        ab[1] = m.diagonal
        ab[2, :-1] = m.off_diagonal
        steady = solve_banded((1, 1), ab, f)

        dec = decompose(ell)
        fn = dec.project(f)
        tail = np.array([mlf_e_alpha_1(0.5, mu * 100.0 ** 0.5)
                         for mu in dec.eigenvalues])
        predicted = np.sqrt(np.sum((fn * tail / dec.eigenvalues) ** 2))
        err = ell.grid.norm(u_final - steady)
        assert err <= predicted + 1e-8


class TestPicard:
    def test_matches_direct_solve_for_negative_reaction(self):
        rng = np.random.default_rng(1)
        for trial in range(4):
            n = 64
            ell, time = setup_problem(n=n, reaction=-1.0,
                                      diffusivity=rng.uniform(1, 2, n + 1),
                                      n_steps=48)
            a = rng.uniform(0, 1, n)
            f = rng.uniform(0, 1, n)
            prob = FractionalProblem(
                0.5, ell, a, SpaceTimeField.from_profile(ell.grid, time, f),
                time)
            tol = 1e-10
            u_pic, rep = picard_solve(prob, tol=tol, max_iter=100)
            u_dir = solve_linear(prob)
            dist = np.abs(u_pic.values - u_dir.values).max()
            assert rep.converged
            assert dist <= 10.0 * tol

    def test_maximum_principle_with_indefinite_reaction(self):
        rng = np.random.default_rng(2)
        n = 96
        c = 10.0 * np.sin(3 * np.pi * np.linspace(0, 1, n))
        ell, time = setup_problem(n=n, reaction=c, n_steps=64)
        a = rng.uniform(0, 1, n) ** 2
        f = rng.uniform(0, 1, n) ** 2
        prob = FractionalProblem(
            0.25, ell, a, SpaceTimeField.from_profile(ell.grid, time, f),
            time)
        u, rep = picard_solve(prob, tol=1e-10, max_iter=120)
        assert rep.converged
        assert u.values.min() >= -1e-8 * np.abs(u.values).max()

    def test_report_diagnostics(self):
        ell, time = setup_problem(n=48, reaction=3.0, n_steps=48)
        a = np.ones(48)
        prob = FractionalProblem(0.5, ell, a,
                                 SpaceTimeField.zeros(ell.grid, time), time)
        u, rep = picard_solve(prob, tol=1e-10, max_iter=100)
        assert rep.shift == 4.0
        assert rep.iterations == len(rep.residuals) <= 50
        assert rep.converged and rep.residuals[-1] <= 1e-10
        m0, c_est = rep.bound_constants
        assert m0 > 0.0 and c_est > 0.0
        assert len(rep.predicted_bounds()) == rep.iterations
        # residual ratios settle into a decreasing tail
        ratios = rep.residual_ratios
        tail = ratios[len(ratios) // 2:]
        assert all(tail[i + 1] <= tail[i] * 1.05 for i in range(len(tail) - 1))

    def test_nonconvergence_carries_report(self):
        ell, time = setup_problem(n=48, reaction=5.0, n_steps=48)
        prob = FractionalProblem(0.5, ell, np.ones(48),
                                 SpaceTimeField.zeros(ell.grid, time), time)
        with pytest.raises(ConvergenceError) as info:
            picard_solve(prob, tol=1e-12, max_iter=3)
        assert info.value.report is not None
        assert info.value.report.iterations == 3
        assert not info.value.report.converged
        assert info.value.result is not None

    def test_tol_validation(self):
        ell, time = setup_problem()
        prob = FractionalProblem(0.5, ell, np.ones(64),
                                 SpaceTimeField.zeros(ell.grid, time), time)
        with pytest.raises(ValidationError):
            picard_solve(prob, tol=-1.0)


class TestCoupled:
    def _species(self, n, time, grid, diffusivity, rng, alpha):
        ell = EllipticProblem(grid, diffusivity, np.zeros(n))
        a = rng.uniform(0, 1, n) ** 2
        f = rng.uniform(0, 1, n) ** 2
        return FractionalProblem(
            alpha, ell, a, SpaceTimeField.from_profile(grid, time, f), time)

    def test_single_species_reduces_to_picard(self):
        rng = np.random.default_rng(4)
        n = 64
        grid = Grid1D(1.0, n)
        time = TimeGrid(1.0, 48)
        diffusivity = rng.uniform(1, 2, n + 1)
        c = rng.uniform(-3, 3, n)
        sp = self._species(n, time, grid, diffusivity, rng, 0.5)
        fields, _ = solve_coupled([sp], c[None, None, :], tol=1e-11)
        scalar_prob = FractionalProblem(
            0.5, EllipticProblem(grid, diffusivity, c), sp.initial,
            sp.source, time)
        u_scalar, _ = picard_solve(scalar_prob, tol=1e-11, max_iter=100)
        np.testing.assert_allclose(fields[0].values, u_scalar.values,
                                   atol=1e-9)

    def test_decoupled_pair_matches_independent_solves(self):
        rng = np.random.default_rng(5)
        n = 64
        grid = Grid1D(1.0, n)
        time = TimeGrid(1.0, 48)
        diffusivity = rng.uniform(1, 2, n + 1)
        sps = [self._species(n, time, grid, diffusivity, rng, 0.5)
               for _ in range(2)]
        fields, _ = solve_coupled(sps, np.zeros((2, 2, n)), tol=1e-11)
        for sp, field in zip(sps, fields):
            u, _ = picard_solve(sp, tol=1e-11, max_iter=100)
            np.testing.assert_allclose(field.values, u.values, atol=1e-9)

    def test_symmetric_coupling_nonnegative(self):
        rng = np.random.default_rng(6)
        n = 64
        grid = Grid1D(1.0, n)
        time = TimeGrid(1.0, 48)
        diffusivity = np.ones(n + 1)
        sps = [self._species(n, time, grid, diffusivity, rng, 0.5)
               for _ in range(2)]
        p = np.zeros((2, 2, n))
        p[0, 1] = 1.0
        p[1, 0] = 1.0
        fields, rep = solve_coupled(sps, p, tol=1e-10)
        assert rep.converged
        for field in fields:
            assert field.values.min() >= -1e-8 * np.abs(field.values).max()

    def test_negative_off_diagonal_rejected(self):
        rng = np.random.default_rng(7)
        n = 32
        grid = Grid1D(1.0, n)
        time = TimeGrid(1.0, 16)
        sps = [self._species(n, time, grid, np.ones(n + 1), rng, 0.5)
               for _ in range(2)]
        p = np.zeros((2, 2, n))
        p[0, 1, 3] = -0.5
        with pytest.raises(ValidationError, match="off-diagonal"):
            solve_coupled(sps, p)

    def test_nonzero_reaction_rejected(self):
        rng = np.random.default_rng(8)
        n = 32
        grid = Grid1D(1.0, n)
        time = TimeGrid(1.0, 16)
        ell = EllipticProblem(grid, np.ones(n + 1), np.full(n, -1.0))
        sp = FractionalProblem(0.5, ell, np.zeros(n),
                               SpaceTimeField.zeros(grid, time), time)
        with pytest.raises(ValidationError, match="reaction"):
            solve_coupled([sp], np.zeros((1, 1, n)))
