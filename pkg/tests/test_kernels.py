import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from sparsewishart import _accel, kernels
from sparsewishart.covglasso import build_penalty_allones, covglasso_fit, rho_max
from sparsewishart.init import cut_linkage, ward_linkage
from sparsewishart.metrics import adjusted_rand_index

from conftest import random_spd


@pytest.fixture
def numpy_backend():
    _accel.set_backend("numpy")
    yield
    _accel.set_backend("numba")


def both_backends(fn):
    _accel.set_backend("numba")
    try:
        a = fn()
        _accel.set_backend("numpy")
        b = fn()
    finally:
        _accel.set_backend("numba")
    return a, b


def test_numba_active_by_default():
    assert _accel.HAVE_NUMBA
    assert _accel.use_numba()


def test_unknown_backend():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


@pytest.mark.parametrize("p", [2, 5, 13])
@pytest.mark.parametrize("diag_pen", [False, True])
def test_sweep_parity(p, diag_pen):
    rng = np.random.default_rng(p)
    s = random_spd(rng, p) / p
    w = build_penalty_allones(p) if not diag_pen else np.ones((p, p))
    rho = 0.3 * rho_max(s, build_penalty_allones(p))

    def run():
        sigma = s + 0.1 * np.eye(p)
        omega = np.linalg.inv(sigma)
        for _ in range(3):
            kernels.covglasso_sweep(sigma, omega, s, rho * w, 1e-12)
        return sigma, omega

    (s_nb, o_nb), (s_np, o_np) = both_backends(run)
    np.testing.assert_allclose(s_nb, s_np, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(o_nb, o_np, rtol=1e-9, atol=1e-11)


def test_sweep_keeps_inverse_in_sync():
    rng = np.random.default_rng(40)
    p = 7
    s = random_spd(rng, p) / p
    sigma = s.copy()
    omega = np.linalg.inv(sigma)
    kernels.covglasso_sweep(sigma, omega, s, 0.2 * rho_max(s, build_penalty_allones(p)) * build_penalty_allones(p), 1e-12)
    np.testing.assert_allclose(sigma @ omega, np.eye(p), atol=1e-9)


def test_fit_parity_full_solve():
    rng = np.random.default_rng(41)
    p = 12
    s = random_spd(rng, p) / p
    P = build_penalty_allones(p)
    a, b = both_backends(lambda: covglasso_fit(s, 0.25 * rho_max(s, P), P).sigma)
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_array_equal(a == 0, b == 0)


def random_dist(rng, n, dim=3):
    x = rng.standard_normal((n, dim))
    return np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))


@pytest.mark.parametrize("n", [2, 3, 10, 60])
def test_ward_matches_scipy(n):
    rng = np.random.default_rng(n)
    d = random_dist(rng, n)
    ours = ward_linkage(d)
    ref = linkage(squareform(d, checks=False), method="ward")
    np.testing.assert_allclose(ours[:, 2], ref[:, 2], rtol=1e-10)
    np.testing.assert_array_equal(ours[:, 3], ref[:, 3])
    for k in range(1, n + 1):
        mine = cut_linkage(ours, n, k)
        theirs = fcluster(ref, k, criterion="maxclust")
        assert len(np.unique(mine)) == k
        if k < n and k > 1:
            assert adjusted_rand_index(mine, theirs) == 1.0


def test_ward_parity():
    rng = np.random.default_rng(42)
    d = random_dist(rng, 40)
    a, b = both_backends(lambda: ward_linkage(d))
    np.testing.assert_array_equal(a, b)


def test_ward_tie_breaking_deterministic():
    d = np.ones((4, 4)) - np.eye(4)
    m = ward_linkage(d)
    assert tuple(m[0, :2]) == (0.0, 1.0)
    a, b = both_backends(lambda: ward_linkage(d))
    np.testing.assert_array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_ward_heights_monotone(n, seed):
    d = random_dist(np.random.default_rng(seed), n)
    heights = ward_linkage(d)[:, 2]
    assert np.all(np.diff(heights) >= -1e-12)
