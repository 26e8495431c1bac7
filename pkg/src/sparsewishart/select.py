"""Choosing ``K`` and ``lambda`` with the sparsity-aware BIC."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import init as _init
from .covglasso import PenaltySpec, rho_max
from .em import Dataset, FitConfig, FitResult, Responsibilities, bic_value, fit_em, weighted_scatter
from .errors import AllFitsFailed, SparseWishartError, ValidationError

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ("K", "lambda", "bic", "loglik", "d0", "converged", "n_iter")


def compute_bic(fit: FitResult, n: int) -> float:
    """``2 log L - d0 log n`` with the unpenalized log-likelihood."""
    return bic_value(fit.loglik, fit.d0, n)


@dataclass
class SelectionGrid:
    k_values: list
    lambda_values: list
    penalty_id: str = "allones"

    def __post_init__(self):
        self.k_values = sorted(int(k) for k in self.k_values)
        self.lambda_values = sorted(float(x) for x in self.lambda_values)
        if not self.k_values or not self.lambda_values:
            raise ValidationError("K and lambda grids must be non-empty")
        if self.k_values[0] < 1:
            raise ValidationError("K values must be positive")
        if self.lambda_values[0] < 0:
            raise ValidationError("lambda values must be nonnegative")


@dataclass
class SelectionRow:
    K: int
    lam: float
    bic: float = float("nan")
    loglik: float = float("nan")
    d0: int = -1
    converged: bool = False
    n_iter: int = 0
    fit: FitResult | None = field(default=None, repr=False)
    error: str | None = None
    error_kind: str | None = None

    def as_record(self) -> dict:
        return {
            "K": self.K, "lambda": self.lam, "bic": self.bic, "loglik": self.loglik,
            "d0": self.d0, "converged": self.converged, "n_iter": self.n_iter,
        }


@dataclass
class SelectionTable:
    rows: list
    best: int

    @property
    def best_row(self) -> SelectionRow:
        return self.rows[self.best]

    @property
    def best_fit(self) -> FitResult:
        return self.rows[self.best].fit

    def for_k(self, K: int) -> list:
        return [r for r in self.rows if r.K == K]


def pick_best(rows) -> int:
    """Index of the highest-BIC converged row; ties prefer fewer nonzero
    parameters, then smaller ``K``, then smaller ``lambda``.

    Rows stopped at ``max_iter`` only compete when nothing converged: a
    component holding a single matrix has an unbounded likelihood (its
    degrees of freedom drift upward forever), so such fits never converge
    and their BIC is an artefact of where EM was cut off.
    """
    ok = [i for i, r in enumerate(rows) if r.fit is not None and np.isfinite(r.bic)]
    if not ok:
        raise AllFitsFailed("no fit in the grid succeeded")
    candidates = [i for i in ok if rows[i].converged]
    if not candidates:
        logger.warning("no fit in the grid converged; selecting among max-iter fits")
        candidates = ok
    return min(candidates, key=lambda i: (-rows[i].bic, rows[i].d0, rows[i].K, rows[i].lam))


def lambda_max(data: Dataset, k_values, weights) -> float:
    """Smallest ``lambda`` that zeroes every penalised off-diagonal of every
    component's first covariance subproblem, over all ``K`` in the grid."""
    best = 0.0
    for K in k_values:
        if K > data.n:
            continue
        labels = _init.initialize_partition(data, K)
        params = _init.init_params_from_partition(data, labels)
        z = np.zeros((data.n, K))
        z[np.arange(data.n), labels] = 1.0
        resp = Responsibilities(z)
        S = weighted_scatter(data, resp, params.dofs)
        counts = resp.soft_counts
        for k in range(K):
            r = rho_max(S[k], weights)
            if np.isfinite(r):
                best = max(best, r * counts[k] * params.dofs[k] / 2.0)
    return best


def auto_lambda_grid(data: Dataset, k_values, weights, length: int = 100) -> list:
    """``length`` equispaced values from 0 to :func:`lambda_max`."""
    if length < 1:
        raise ValidationError("grid length must be positive")
    top = lambda_max(data, k_values, weights)
    if length == 1 or top == 0:
        return [0.0] if length == 1 else list(np.linspace(0.0, 1.0, length))
    return [float(x) for x in np.linspace(0.0, top, length)]


def _fit_chain(data: Dataset, K: int, lambdas, weights, penalty_id: str, config: FitConfig) -> list:
    rows = []
    if K > data.n:
        return [SelectionRow(K, lam, error=f"K={K} exceeds n={data.n}", error_kind="TooFewObservations")
                for lam in lambdas]
    labels = _init.initialize_partition(data, K)
    warm = None
    for lam in lambdas:
        penalty = PenaltySpec(lam, weights, penalty_id)
        try:
            fit = fit_em(data, K, penalty, config, init_labels=labels, init_params=warm)
        except SparseWishartError as exc:
            logger.warning("fit K=%d lambda=%g failed: %s", K, lam, exc)
            rows.append(SelectionRow(K, lam, error=str(exc), error_kind=type(exc).__name__))
            warm = None
            continue
        warm = fit.params
        rows.append(SelectionRow(K, lam, fit.bic, fit.loglik, fit.d0, fit.converged, fit.n_iter, fit))
    return rows


def grid_search(
    data: Dataset,
    grid: SelectionGrid,
    weights,
    config: FitConfig | None = None,
    workers: int = 1,
) -> SelectionTable:
    """Fit every ``(K, lambda)`` cell and locate the BIC maximiser.

    For each ``K`` the lambdas are fitted in increasing order, each warm
    started from the previous solution; the first starts from the Ward
    partition, which is shared by the whole chain.  Chains for different
    ``K`` run in a process pool when ``workers > 1``; rows are always
    returned sorted by ``(K, lambda)``.
    """
    config = config or FitConfig()
    weights = np.asarray(weights, dtype=float)
    # build the shared distance/linkage cache once before fanning out
    data.linkage()
    chains = {}
    if workers > 1 and len(grid.k_values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                K: pool.submit(_fit_chain, data, K, grid.lambda_values, weights, grid.penalty_id, config)
                for K in grid.k_values
            }
            chains = {K: f.result() for K, f in futures.items()}
    else:
        for K in grid.k_values:
            chains[K] = _fit_chain(data, K, grid.lambda_values, weights, grid.penalty_id, config)
    rows = [row for K in grid.k_values for row in chains[K]]
    return SelectionTable(rows, pick_best(rows))
