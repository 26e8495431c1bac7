"""Wishart density, Bartlett sampling and the degrees-of-freedom equation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DimMismatch, InvalidDof, NoRootInBracket
from .linalg import (
    _as_array,
    cholesky,
    digamma,
    log_det,
    log_multivariate_gamma,
    spd_inverse,
)

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)
NU_MAX = 1e5
NU_MARGIN = 1e-6


@dataclass(frozen=True)
class WishartComponent:
    """Scale matrix and degrees of freedom of one mixture component."""

    scale: np.ndarray
    dof: float

    def __post_init__(self):
        scale = _as_array(self.scale)
        p = scale.shape[0]
        if not self.dof > p - 1:
            raise InvalidDof(f"degrees of freedom {self.dof} must exceed p - 1 = {p - 1}")
        cholesky(scale)

    @property
    def dim(self) -> int:
        return self.scale.shape[0]


def _check_dof(nu: float, p: int) -> None:
    if not nu > p - 1:
        raise InvalidDof(f"degrees of freedom {nu} must exceed p - 1 = {p - 1}")


def wishart_logpdf(gamma, comp: WishartComponent, gamma_logdet: float | None = None) -> float:
    """Log density of ``gamma`` under ``Wishart(comp.scale, comp.dof)``.

    ``gamma_logdet`` lets callers pass a cached ``log|gamma|``.
    """
    g = _as_array(gamma)
    sigma = _as_array(comp.scale)
    if g.shape != sigma.shape:
        raise DimMismatch(f"observation {g.shape} vs scale {sigma.shape}")
    if gamma_logdet is None:
        gamma_logdet = log_det(g)
    return float(
        wishart_logpdf_batch(g[None], np.array([gamma_logdet]), sigma, comp.dof)[0]
    )


def wishart_logpdf_batch(gammas: np.ndarray, logdets: np.ndarray, sigma: np.ndarray, nu: float) -> np.ndarray:
    """Vectorised log density for a stack of observations ``(n, p, p)``."""
    p = sigma.shape[0]
    _check_dof(nu, p)
    sigma_inv = spd_inverse(sigma)
    ld_sigma = log_det(sigma)
    traces = np.einsum("jh,ijh->i", sigma_inv, gammas)
    const = -0.5 * nu * p * LOG2 - 0.5 * nu * ld_sigma - log_multivariate_gamma(0.5 * nu, p)
    return 0.5 * (nu - p - 1) * logdets - 0.5 * traces + const


def wishart_sample(comp: WishartComponent, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the Wishart via the Bartlett decomposition.

    Returns one ``(p, p)`` matrix, or a ``(size, p, p)`` stack.  The diagonal
    of the Bartlett factor uses gamma draws, so non-integer ``dof`` works.
    """
    sigma = _as_array(comp.scale)
    p = sigma.shape[0]
    nu = float(comp.dof)
    _check_dof(nu, p)
    L = cholesky(sigma)
    m = 1 if size is None else int(size)
    A = np.tril(rng.standard_normal((m, p, p)), -1)
    shapes = 0.5 * (nu - np.arange(p))
    diag = np.sqrt(rng.gamma(shapes, 2.0, size=(m, p)))
    A[:, np.arange(p), np.arange(p)] = diag
    LA = L @ A
    out = LA @ np.swapaxes(LA, 1, 2)
    out = 0.5 * (out + np.swapaxes(out, 1, 2))
    return out[0] if size is None else out


def dof_rhs(nu: float, p: int, weight_sum: float = 1.0) -> float:
    """``weight_sum * sum_{j=1..p} psi((nu - j + 1) / 2)``; increasing in ``nu``."""
    return weight_sum * float(np.sum(digamma(0.5 * (nu - np.arange(p)))))


def dof_lhs(gammas_logdets: np.ndarray, weights: np.ndarray, sigma) -> float:
    """``sum_i z_i log|Gamma_i Sigma^{-1} / 2|`` from cached log-determinants."""
    p = _as_array(sigma).shape[0]
    return float(np.dot(weights, gammas_logdets - log_det(sigma) - p * LOG2))


def solve_dof(
    weighted_logdet_sum: float,
    weight_sum: float,
    p: int,
    nu_max: float = NU_MAX,
) -> float:
    """Root in ``nu`` of the degrees-of-freedom stationarity equation.

    Solves ``weighted_logdet_sum = dof_rhs(nu, p, weight_sum)`` on
    ``(p - 1 + 1e-6, nu_max]``.  The bracket is grown by doubling from
    ``p + 1`` and the root polished with Brent's method.

    Raises
    ------
    NoRootInBracket
        If the left side lies outside the range of the right side; the
        exception carries the nearest admissible endpoint as ``bound``.
    """
    if not weight_sum > 0:
        raise ValueError("weight_sum must be positive")
    lhs = weighted_logdet_sum / weight_sum
    lo = p - 1 + NU_MARGIN

    def f(nu):
        return dof_rhs(nu, p) - lhs

    f_lo = f(lo)
    if f_lo > 0:
        raise NoRootInBracket(f"root lies below nu = {lo}", lo)
    if f_lo == 0:
        return lo
    hi = min(float(p + 1), nu_max)
    f_hi = f(hi)
    a = lo
    while f_hi < 0:
        if hi >= nu_max:
            raise NoRootInBracket(f"root lies above nu_max = {nu_max}", nu_max)
        a = hi
        hi = min(2.0 * hi, nu_max)
        f_hi = f(hi)
    if f_hi == 0:
        return hi
    return brentq(f, a, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_dof_clamped(weighted_logdet_sum: float, weight_sum: float, p: int, nu_max: float = NU_MAX) -> float:
    """:func:`solve_dof`, falling back to the nearest bound with a warning."""
    try:
        return solve_dof(weighted_logdet_sum, weight_sum, p, nu_max)
    except NoRootInBracket as exc:
        logger.warning("degrees of freedom clamped to %g: %s", exc.bound, exc)
        return exc.bound
