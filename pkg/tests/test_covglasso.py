import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize, minimize_scalar

from sparsewishart import kernels
from sparsewishart.covglasso import (
    PenaltySpec,
    build_penalty_allones,
    build_penalty_from_prior,
    covglasso_fit,
    covglasso_objective,
    rho_max,
)
from sparsewishart.errors import AllZeroPrior, SingularInit, ValidationError

from conftest import random_spd


def objective_termwise(sigma, s, rho, P):
    """Independent evaluation: slogdet + explicit inverse + elementwise sum."""
    sign, ld = np.linalg.slogdet(sigma)
    assert sign > 0
    inv = np.linalg.inv(sigma)
    tr = sum(inv[i, j] * s[j, i] for i in range(s.shape[0]) for j in range(s.shape[0]))
    pen = sum(P[i, j] * abs(sigma[i, j]) for i in range(s.shape[0]) for j in range(s.shape[0]))
    return ld + tr + rho * pen


def brute_force_p2(s, rho, P):
    """Minimise over (s11, s22, s12): Nelder-Mead on the log-diagonals with
    an inner bounded scalar search over the off-diagonal."""

    def inner(log_d):
        a, b = math.exp(log_d[0]), math.exp(log_d[1])
        lim = math.sqrt(a * b) * (1 - 1e-9)

        def f(c):
            sig = np.array([[a, c], [c, b]])
            return objective_termwise(sig, s, rho, P)

        cands = [minimize_scalar(f, bounds=(-lim, 0.0), method="bounded", options={"xatol": 1e-10}),
                 minimize_scalar(f, bounds=(0.0, lim), method="bounded", options={"xatol": 1e-10})]
        best = min(cands, key=lambda r: r.fun)
        c = best.x if best.fun < f(0.0) else 0.0
        return f(c), c

    start = np.log(np.diag(s))
    res = minimize(lambda x: inner(x)[0], start, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    a, b = np.exp(res.x)
    c = inner(res.x)[1]
    return np.array([[a, c], [c, b]])


class TestObjective:
    def test_identity_unpenalised(self):
        assert covglasso_objective(np.eye(3), np.eye(3), 0.0, np.ones((3, 3))) == pytest.approx(3.0, abs=1e-14)

    def test_direct_value(self):
        val = covglasso_objective(np.eye(2), 2 * np.eye(2), 1.0, np.ones((2, 2)))
        assert val == pytest.approx(6.0, abs=1e-14)

    def test_termwise_oracle(self):
        rng = np.random.default_rng(6)
        sigma, s = random_spd(rng, 4), random_spd(rng, 4)
        P = build_penalty_allones(4)
        assert covglasso_objective(sigma, s, 0.3, P) == pytest.approx(
            objective_termwise(sigma, s, 0.3, P), abs=1e-10)


class TestFit:
    def test_rho_zero_returns_s(self):
        rng = np.random.default_rng(7)
        s = random_spd(rng, 5)
        sol = covglasso_fit(s, 0.0, build_penalty_allones(5))
        assert np.linalg.norm(sol.sigma - s) / np.linalg.norm(s) <= 1e-6

    def test_rho_zero_sweep_fixed_point(self):
        rng = np.random.default_rng(70)
        s = random_spd(rng, 6)
        sigma = s.copy()
        omega = np.linalg.inv(s)
        kernels.covglasso_sweep(sigma, omega, s, np.zeros((6, 6)), 1e-12)
        np.testing.assert_allclose(sigma, s, rtol=0, atol=1e-8 * np.abs(s).max())

    def test_large_rho_gives_diagonal(self):
        rng = np.random.default_rng(71)
        s = random_spd(rng, 5)
        sol = covglasso_fit(s, 1e6, build_penalty_allones(5))
        off = ~np.eye(5, dtype=bool)
        assert np.all(sol.sigma[off] == 0.0)
        np.testing.assert_allclose(np.diag(sol.sigma), np.diag(s), rtol=1e-4)

    def test_diagonal_limit_scalar_check(self):
        # with Sigma restricted to diagonal the objective separates into
        # log x + s_jj / x, minimised at x = s_jj
        s_jj = 2.7
        res = minimize_scalar(lambda x: math.log(x) + s_jj / x, bounds=(0.01, 100), method="bounded",
                              options={"xatol": 1e-12})
        assert res.x == pytest.approx(s_jj, rel=1e-6)

    def test_spec_p2_brute_force(self):
        s = np.array([[1.0, 0.5], [0.5, 1.0]])
        P = build_penalty_allones(2)
        sol = covglasso_fit(s, 0.1, P, tol=1e-14, max_sweeps=5000)
        np.testing.assert_allclose(sol.sigma, brute_force_p2(s, 0.1, P), atol=1e-3)

    def test_twenty_p2_problems(self):
        rng = np.random.default_rng(72)
        P = build_penalty_allones(2)
        for _ in range(20):
            s = random_spd(rng, 2, ridge=0.3)
            rho = float(rng.uniform(0.01, 1.0)) * rho_max(s, P)
            sol = covglasso_fit(s, rho, P, tol=1e-14, max_sweeps=5000)
            np.testing.assert_allclose(sol.sigma, brute_force_p2(s, rho, P), atol=1e-3)

    def test_objective_monotone_fifty(self):
        rng = np.random.default_rng(73)
        for _ in range(50):
            p = int(rng.integers(2, 21))
            s = random_spd(rng, p, ridge=0.5) / p
            P = build_penalty_allones(p)
            rho = float(rng.uniform(0, 1)) * rho_max(s, P)
            sol = covglasso_fit(s, rho, P)
            steps = np.diff(sol.objective_trace)
            assert np.all(steps <= 1e-9)

    def test_support_path_mostly_monotone(self):
        rng = np.random.default_rng(74)
        violations = pairs = 0
        for _ in range(20):
            p = int(rng.integers(4, 12))
            s = random_spd(rng, p, ridge=1.0) / p
            P = build_penalty_allones(p)
            top = rho_max(s, P)
            warm = None
            counts = []
            for rho in np.linspace(0, top, 12):
                sol = covglasso_fit(s, rho, P, sigma_init=warm)
                warm = sol.sigma
                counts.append(int(np.count_nonzero(np.triu(sol.sigma, 1))))
            pairs += len(counts) - 1
            violations += int(np.sum(np.diff(counts) > 0))
        assert violations <= 0.05 * pairs

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(75)
        s = random_spd(rng, 8) / 8
        P = build_penalty_allones(8)
        sol = covglasso_fit(s, 0.4 * rho_max(s, P), P)
        np.testing.assert_array_equal(sol.sigma, sol.sigma.T)
        np.testing.assert_array_equal(sol.support, sol.sigma != 0)

    def test_singular_s_accepted(self):
        rng = np.random.default_rng(76)
        x = rng.standard_normal((3, 6))
        s = x.T @ x / 3
        P = build_penalty_allones(6)
        sol = covglasso_fit(s, 0.2 * rho_max(s, P), P)
        assert np.all(np.linalg.eigvalsh(sol.sigma) > 0)

    def test_bad_init_rejected(self):
        with pytest.raises(SingularInit):
            covglasso_fit(np.eye(2), 0.1, build_penalty_allones(2), sigma_init=np.ones((2, 2)))

    def test_kkt_at_solution(self):
        rng = np.random.default_rng(77)
        p = 6
        s = random_spd(rng, p) / p
        P = build_penalty_allones(p)
        rho = 0.3 * rho_max(s, P)
        sol = covglasso_fit(s, rho, P, tol=1e-14, max_sweeps=5000)
        inv = np.linalg.inv(sol.sigma)
        grad = inv - inv @ s @ inv
        off = ~np.eye(p, dtype=bool)
        nz = off & (sol.sigma != 0)
        z = off & (sol.sigma == 0)
        # entries (j,h) and (h,j) are one variable, so both sides carry a factor 2
        np.testing.assert_allclose(grad[nz], -rho * P[nz] * np.sign(sol.sigma[nz]), atol=1e-6)
        assert np.all(np.abs(grad[z]) <= rho * P[z] + 1e-6)
        np.testing.assert_allclose(np.diag(grad), 0, atol=1e-5)


class TestPenalties:
    def test_allones(self):
        np.testing.assert_array_equal(build_penalty_allones(2), [[0, 1], [1, 0]])
        np.testing.assert_array_equal(build_penalty_allones(1), [[0]])
        np.testing.assert_array_equal(build_penalty_allones(3).sum(axis=1), [2, 2, 2])

    def test_prior_max_unpenalised(self):
        W = np.array([[0, 5, 1], [5, 0, 2], [1, 2, 0]], dtype=float)
        P = build_penalty_from_prior(W)
        assert P[0, 1] == 0.0 and P[1, 0] == 0.0
        assert np.all(np.diag(P) == 0)

    def test_prior_single_pair(self):
        W = np.zeros((4, 4))
        W[1, 3] = W[3, 1] = 2.5
        P = build_penalty_from_prior(W)
        expect = build_penalty_allones(4)
        expect[1, 3] = expect[3, 1] = 0
        np.testing.assert_array_equal(P, expect)

    def test_prior_scale_invariant(self):
        rng = np.random.default_rng(78)
        W = rng.uniform(0, 10, (5, 5))
        W = W + W.T
        np.testing.assert_allclose(build_penalty_from_prior(3.7 * W), build_penalty_from_prior(W), atol=1e-15)

    def test_prior_all_zero(self):
        with pytest.raises(AllZeroPrior):
            build_penalty_from_prior(np.eye(3))

    def test_penalty_spec_validation(self):
        with pytest.raises(ValidationError):
            PenaltySpec(-1.0, build_penalty_allones(2))
        with pytest.raises(ValidationError):
            PenaltySpec(1.0, -np.ones((2, 2)))


@st.composite
def problems(draw):
    p = draw(st.integers(2, 10))
    seed = draw(st.integers(0, 2**32 - 1))
    frac = draw(st.floats(0.0, 1.2))
    rng = np.random.default_rng(seed)
    s = random_spd(rng, p, ridge=0.5) / p
    return s, frac


@settings(max_examples=40, deadline=None)
@given(problems())
def test_fit_never_worse_than_start(prob):
    s, frac = prob
    P = build_penalty_allones(s.shape[0])
    rho = frac * rho_max(s, P)
    sol = covglasso_fit(s, rho, P)
    assert sol.objective <= covglasso_objective(s, s, rho, P) + 1e-9
    assert np.all(np.diff(sol.objective_trace) <= 1e-9)
    assert np.all(np.linalg.eigvalsh(sol.sigma) > 0)


@settings(max_examples=40, deadline=None)
@given(problems())
def test_rho_max_certifies_diagonal_stationarity(prob):
    # non-convex objective: rho_max is the smallest rho at which diag(S)
    # satisfies the subgradient conditions, not a global-optimality bound
    s, _ = prob
    p = s.shape[0]
    P = build_penalty_allones(p)
    r = rho_max(s, P)
    d = np.diag(1 / np.diag(s))
    grad = d - d @ s @ d
    off = ~np.eye(p, dtype=bool)
    assert np.all(np.abs(grad[off]) <= r * P[off] * (1 + 1e-12))
    if r > 0:
        assert np.any(np.abs(grad[off]) > 0.999 * r * P[off])


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 10), st.floats(-5, 5), st.floats(0.05, 10), st.floats(0, 5))
def test_profile_step_is_global_1d_minimiser(a, b, c_extra, w):
    c0 = b * b / a + c_extra  # keeps the quadratic positive
    x = kernels._profile_coord(a, b, c0, w)
    x_py = kernels._profile_coord_py(a, b, c0, w)
    assert x == pytest.approx(x_py, rel=1e-12, abs=1e-15)

    def g(t):
        return np.log(a * t * t + 2 * b * t + c0) + 2 * w * np.abs(t)

    grid = np.linspace(-20, 20, 400_001)
    assert g(x) <= g(grid).min() + 1e-9
