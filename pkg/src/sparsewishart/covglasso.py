"""Covariance graphical lasso.

Minimises ``log|Sigma| + tr(Sigma^{-1} S) + rho * sum_jh P_jh |Sigma_jh|``
over positive definite ``Sigma`` by block coordinate descent on columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AllZeroPrior, DimMismatch, Diverged, NotPositiveDefinite, SingularInit, ValidationError
from .linalg import _as_array, _cholesky_or_none, is_positive_definite, symmetrize

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 500
DIVERGENCE_SLACK = 1e-6


@dataclass(frozen=True)
class PenaltySpec:
    """Shrinkage factor and entrywise weight matrix of the L1 penalty."""

    lam: float
    weights: np.ndarray
    penalty_id: str = "custom"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        w = symmetrize(self.weights)
        if np.any(w < 0):
            raise ValidationError("penalty weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(lam, self.weights, self.penalty_id)

    def value(self, sigma) -> float:
        """``lam * ||P * sigma||_1``."""
        return self.lam * float(np.sum(self.weights * np.abs(sigma)))


@dataclass
class CovglassoSolution:
    sigma: np.ndarray
    objective: float
    n_sweeps: int
    objective_trace: list = field(default_factory=list)

    @property
    def support(self) -> np.ndarray:
        return self.sigma != 0


def build_penalty_allones(p: int) -> np.ndarray:
    """Ones off the diagonal, zeros on it."""
    return np.ones((p, p)) - np.eye(p)


def build_penalty_from_prior(W) -> np.ndarray:
    """Weights ``1 - W / max(W)`` off the diagonal, zero on it.

    Stronger prior connections are penalised less; the pair with the largest
    connection strength is left unpenalised.
    """
    W = symmetrize(W)
    if np.any(W < 0):
        raise ValidationError("prior connection strengths must be nonnegative")
    off = W[~np.eye(W.shape[0], dtype=bool)]
    wmax = off.max() if off.size else 0.0
    if not wmax > 0:
        raise AllZeroPrior("prior matrix has no positive off-diagonal entry")
    P = 1.0 - W / wmax
    np.fill_diagonal(P, 0.0)
    return P


def covglasso_objective(sigma, s_tilde, rho: float, weights) -> float:
    sigma = _as_array(sigma)
    s_tilde = _as_array(s_tilde)
    weights = np.asarray(weights, dtype=float)
    if sigma.shape != s_tilde.shape or weights.shape != sigma.shape:
        raise DimMismatch("sigma, s_tilde and weights must share a shape")
    L = _cholesky_or_none(sigma)
    if L is None:
        raise NotPositiveDefinite("sigma is not positive definite")
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    Linv_s = np.linalg.solve(L, s_tilde)
    trace = np.trace(np.linalg.solve(L.T, Linv_s))
    return float(logdet + trace + rho * np.sum(weights * np.abs(sigma)))


def default_init(s_tilde: np.ndarray) -> np.ndarray:
    """``s_tilde`` itself when PD, else a ridge-inflated copy."""
    if is_positive_definite(s_tilde):
        return s_tilde.copy()
    ridge = 1e-3 * np.mean(np.diag(s_tilde))
    if not ridge > 0:
        ridge = 1e-3
    return s_tilde + ridge * np.eye(s_tilde.shape[0])


def covglasso_fit(
    s_tilde,
    rho: float,
    weights,
    sigma_init=None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> CovglassoSolution:
    """Solve the covariance graphical lasso by column-wise coordinate descent.

    Parameters
    ----------
    s_tilde : (p, p) array
        Positive semidefinite sample matrix.
    rho : float
        Penalty level; the effective entrywise weight is ``rho * weights``.
    weights : (p, p) array
        Nonnegative symmetric weight matrix ``P``.
    sigma_init : (p, p) array, optional
        Positive definite warm start.  Defaults to ``s_tilde`` (ridged when
        singular).
    tol : float
        Stop when the relative objective decrease of a sweep is ``<= tol``.
    max_sweeps : int
        Hard cap on the number of sweeps.

    Returns
    -------
    CovglassoSolution
        The objective never increases from ``sigma_init`` to the result.
    """
    s = symmetrize(s_tilde)
    p = s.shape[0]
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (p, p):
        raise DimMismatch(f"weights shape {weights.shape} does not match p={p}")
    if rho < 0:
        raise ValidationError("rho must be nonnegative")
    pen = rho * 0.5 * (weights + weights.T)

    if not np.any(pen > 0) and is_positive_definite(s):
        # unpenalised problem: the minimiser is s_tilde itself
        obj = covglasso_objective(s, s, 0.0, weights)
        return CovglassoSolution(s, obj, 0, [obj])

    if sigma_init is None:
        sigma = default_init(s)
    else:
        sigma = symmetrize(sigma_init)
        if _cholesky_or_none(sigma) is None:
            raise SingularInit("sigma_init is not positive definite")
    sigma = np.ascontiguousarray(sigma)
    omega = np.linalg.inv(sigma)
    omega = 0.5 * (omega + omega.T)
    dscale = np.max(np.diag(s)) if p else 1.0
    gamma_floor = 1e-12 * (dscale if dscale > 0 else 1.0)

    obj = covglasso_objective(sigma, s, rho, weights)
    trace = [obj]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        prev_sigma = sigma.copy()
        kernels.covglasso_sweep(sigma, omega, s, pen, gamma_floor)
        if _cholesky_or_none(sigma) is None:
            # lost definiteness to rounding; keep the last good iterate
            sigma = prev_sigma
            break
        new_obj = covglasso_objective(sigma, s, rho, weights)
        if new_obj > obj + DIVERGENCE_SLACK * max(1.0, abs(obj)):
            raise Diverged(f"objective rose from {obj!r} to {new_obj!r} in sweep {sweeps}")
        if new_obj > obj:
            # round-off level increase: keep the better iterate and stop
            sigma = prev_sigma
            break
        trace.append(new_obj)
        decrease = obj - new_obj
        obj = new_obj
        # resync the inverse to keep round-off from accumulating
        omega = np.linalg.inv(sigma)
        omega = 0.5 * (omega + omega.T)
        if decrease <= tol * max(abs(obj), 1.0):
            break
    return CovglassoSolution(sigma, trace[-1], sweeps, trace)


def rho_max(s_tilde, weights) -> float:
    """Smallest ``rho`` at which ``diag(s_tilde)`` satisfies the stationarity
    conditions of the penalised problem (all off-diagonals zero)."""
    s = _as_array(s_tilde)
    weights = np.asarray(weights, dtype=float)
    d = np.diag(s)
    denom = np.outer(d, d)
    off = ~np.eye(s.shape[0], dtype=bool)
    need = np.abs(s[off]) / denom[off]
    w = weights[off]
    active = need > 0
    if not np.any(active):
        return 0.0
    if np.any(active & (w == 0)):
        return np.inf
    return float(np.max(need[active] / w[active]))
