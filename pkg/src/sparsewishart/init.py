"""Riemannian distance, Ward hierarchical clustering and EM starting values."""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import DimMismatch, EmptyComponent, TooFewObservations
from .linalg import _as_array, log_det, spd_inv_sqrt, spd_logm
from .wishart import LOG2, solve_dof_clamped


def riemannian_distance(a, b) -> float:
    """Affine-invariant distance ``||logm(a^{-1/2} b a^{-1/2})||_F``."""
    a = _as_array(a)
    b = _as_array(b)
    if a.shape != b.shape:
        raise DimMismatch(f"shapes {a.shape} and {b.shape} differ")
    w = spd_inv_sqrt(a)
    return float(np.linalg.norm(spd_logm(w @ b @ w), "fro"))


def riemannian_distance_matrix(matrices: np.ndarray) -> np.ndarray:
    """Pairwise distances for a stack ``(n, p, p)``.

    Uses the eigenvalues of the whitened matrices, which gives the same value
    as :func:`riemannian_distance` without forming matrix logarithms.
    """
    n = matrices.shape[0]
    D = np.zeros((n, n))
    for i in range(n - 1):
        w = spd_inv_sqrt(matrices[i])
        rest = w @ matrices[i + 1:] @ w
        rest = 0.5 * (rest + np.swapaxes(rest, 1, 2))
        ev = np.linalg.eigvalsh(rest)
        d = np.sqrt(np.sum(np.log(ev) ** 2, axis=1))
        D[i, i + 1:] = d
        D[i + 1:, i] = d
    return D


def ward_linkage(dist: np.ndarray) -> np.ndarray:
    """Ward merge table (scipy layout) for a symmetric dissimilarity matrix."""
    dist = np.ascontiguousarray(dist, dtype=float)
    return kernels.ward_merges(dist)


def cut_linkage(merges: np.ndarray, n: int, k: int) -> np.ndarray:
    """Labels ``0..k-1`` after replaying the first ``n - k`` merges.

    Clusters are numbered by the position of their first member, so the
    result does not depend on merge bookkeeping.
    """
    if not 1 <= k <= n:
        raise TooFewObservations(f"cannot cut {n} observations into {k} clusters")
    parent = np.arange(2 * n - 1)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step in range(n - k):
        a, b = int(merges[step, 0]), int(merges[step, 1])
        parent[find(a)] = n + step
        parent[find(b)] = n + step
    roots = np.array([find(i) for i in range(n)])
    _, first = np.unique(roots, return_index=True)
    order = {roots[i]: r for r, i in enumerate(sorted(first))}
    return np.array([order[r] for r in roots], dtype=np.int64)


def initialize_partition(data, K: int) -> np.ndarray:
    """Hard labels from Ward clustering on Riemannian distances.

    The distance matrix and the full merge table are cached on ``data``,
    so cutting at several ``K`` costs one clustering.
    """
    n = data.n
    if not 1 <= K <= n:
        raise TooFewObservations(f"K={K} needs at least K observations, got n={n}")
    return cut_linkage(data.linkage(), n, K)


def init_params_from_partition(data, labels, nu0: float | None = None):
    """Mixture parameters from a hard partition.

    ``tau`` are the cluster fractions, ``Sigma_k`` the cluster mean divided
    by ``nu0 = p + 2``, and each ``nu_k`` is one solve of the
    degrees-of-freedom equation against that ``Sigma_k``.
    """
    from .em import MixtureParams

    labels = np.asarray(labels)
    K = int(labels.max()) + 1 if labels.size else 0
    p = data.p
    if nu0 is None:
        nu0 = p + 2.0
    counts = np.bincount(labels, minlength=K)
    if np.any(counts == 0):
        raise EmptyComponent("initial partition has an empty cluster", int(np.argmin(counts)))
    tau = counts / labels.size
    sigmas = np.empty((K, p, p))
    dofs = np.empty(K)
    for k in range(K):
        members = labels == k
        mean = data.matrices[members].mean(axis=0)
        sigmas[k] = 0.5 * (mean + mean.T) / nu0
        lhs = float(np.sum(data.logdets[members] - log_det(sigmas[k]) - p * LOG2))
        dofs[k] = solve_dof_clamped(lhs, float(counts[k]), p)
    return MixtureParams(tau, sigmas, dofs)


def perturb_partition(labels, rng: np.random.Generator, fraction: float = 0.1) -> np.ndarray:
    """Move a random ``fraction`` of observations to random clusters, keeping
    every cluster non-empty."""
    labels = np.asarray(labels).copy()
    K = int(labels.max()) + 1
    n = labels.size
    m = max(1, int(round(fraction * n)))
    for _ in range(100):
        out = labels.copy()
        pick = rng.choice(n, size=min(m, n), replace=False)
        out[pick] = rng.integers(0, K, size=pick.size)
        if np.all(np.bincount(out, minlength=K) > 0):
            return out
    return labels


def grow_smallest_cluster(labels, dist: np.ndarray) -> np.ndarray:
    """Reassign the nearest neighbours of the smallest cluster's medoid to it.

    The cluster doubles in size (at least two members); donors keep at least
    one member each.  Deterministic.
    """
    labels = np.asarray(labels).copy()
    K = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=K)
    c = int(np.argmin(counts))
    members = np.flatnonzero(labels == c)
    sub = dist[np.ix_(members, members)]
    medoid = members[int(np.argmin(sub.sum(axis=1)))]
    target = max(2 * counts[c], 2)
    for j in np.argsort(dist[medoid], kind="stable"):
        if counts[c] >= target:
            break
        donor = labels[j]
        if donor == c or counts[donor] <= 1:
            continue
        labels[j] = c
        counts[donor] -= 1
        counts[c] += 1
    return labels
