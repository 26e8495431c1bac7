"""Clustering and support-recovery metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimMismatch, LengthMismatch


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2.0


def contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index of two partitions."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"label vectors differ in length: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise LengthMismatch("need at least two observations")
    table = contingency(a, b)
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all-in-one or all singletons) and identical
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def frobenius_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sqrt(np.sum((a - b) ** 2)))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def f1_support(truth, estimate, include_diagonal: bool = False):
    """F1 score of the nonzero pattern of ``estimate`` against ``truth``.

    Positions are the upper triangle (strict unless ``include_diagonal``);
    an entry counts as nonzero when it is not exactly zero.  Returns
    ``(f1, ConfusionCounts)``; F1 is 1 when there is nothing to find and
    nothing was found.
    """
    truth = np.asarray(truth)
    estimate = np.asarray(estimate)
    if truth.shape != estimate.shape or truth.ndim != 2 or truth.shape[0] != truth.shape[1]:
        raise DimMismatch(f"shapes {truth.shape} and {estimate.shape} are not equal square matrices")
    iu = np.triu_indices(truth.shape[0], 0 if include_diagonal else 1)
    t = truth[iu] != 0
    e = estimate[iu] != 0
    counts = ConfusionCounts(
        tp=int(np.sum(t & e)), fp=int(np.sum(~t & e)), fn=int(np.sum(t & ~e)), tn=int(np.sum(~t & ~e))
    )
    denom = counts.tp + 0.5 * (counts.fp + counts.fn)
    f1 = 1.0 if denom == 0 else counts.tp / denom
    return f1, counts


def match_clusters(est, truth, K: int | None = None) -> np.ndarray:
    """Relabelling of estimated clusters that maximises agreement with truth.

    Labels are 0-based.  Returns ``perm`` such that estimated cluster ``k``
    corresponds to true component ``perm[k]``, found by exact assignment
    on the confusion matrix.
    """
    est = np.asarray(est, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if est.shape != truth.shape:
        raise LengthMismatch("label vectors differ in length")
    if K is None:
        K = int(max(est.max(), truth.max())) + 1
    conf = np.zeros((K, K), dtype=np.int64)
    np.add.at(conf, (est, truth), 1)
    rows, cols = linear_sum_assignment(-conf)
    perm = np.empty(K, dtype=np.int64)
    perm[rows] = cols
    return perm


def matched_diagonal(est, truth, perm) -> int:
    est = np.asarray(est)
    truth = np.asarray(truth)
    return int(np.sum(np.asarray(perm)[est] == truth))
