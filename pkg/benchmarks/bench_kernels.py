"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--reps 5]

Each kernel runs once per backend to warm up (numba compiles on first call),
then ``--reps`` timed runs; the median wall time is reported together with
the maximum absolute difference between the two backends' outputs.
"""
import argparse
import statistics
import time

import numpy as np

from sparsewishart import _accel
from sparsewishart.covglasso import build_penalty_allones, covglasso_fit, rho_max
from sparsewishart.init import riemannian_distance_matrix, ward_linkage
from sparsewishart.simulate import make_er_sigma
from sparsewishart.wishart import WishartComponent, wishart_sample


def _time(fn, reps):
    fn()
    out, times = None, []
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def covglasso_case(p, seed):
    rng = np.random.default_rng(seed)
    sigma = make_er_sigma(p, 0.1, rng=rng)
    nu = p + 20.0
    draws = wishart_sample(WishartComponent(sigma, nu), rng, size=40)
    s = draws.mean(axis=0) / nu
    w = build_penalty_allones(p)
    rho = 0.3 * rho_max(s, w)
    return lambda: covglasso_fit(s, rho, w).sigma


def ward_case(n, p, seed):
    rng = np.random.default_rng(seed)
    mats = wishart_sample(WishartComponent(np.eye(p), p + 10.0), rng, size=n)
    dist = riemannian_distance_matrix(mats)
    return lambda: ward_linkage(dist)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()
    cases = [
        ("covglasso p=10", covglasso_case(10, 0)),
        ("covglasso p=25", covglasso_case(25, 1)),
        ("covglasso p=50", covglasso_case(50, 2)),
        ("ward n=100", ward_case(100, 5, 3)),
        ("ward n=300", ward_case(300, 5, 4)),
    ]
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in cases:
        _accel.set_backend("numba")
        t_nb, out_nb = _time(fn, args.reps)
        _accel.set_backend("numpy")
        t_np, out_np = _time(fn, args.reps)
        diff = float(np.max(np.abs(np.asarray(out_nb) - np.asarray(out_np))))
        print(f"{name:<18}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}{diff:>14.2e}")
    _accel.set_backend("numba")


if __name__ == "__main__":
    main()
