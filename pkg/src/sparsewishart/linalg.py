"""Dense SPD linear algebra and the special functions used by the Wishart density.

All functions accept either a plain ``numpy.ndarray`` or an :class:`SpdMatrix`
and never mutate their input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import AsymmetricInput, DimMismatch, DomainError, NotPositiveDefinite

SYMMETRY_RTOL = 1e-8
PIVOT_RTOL = 1e-12
EIG_RTOL = 1e-12


def symmetrize(m, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Return ``(m + m.T) / 2`` after checking the asymmetry is only noise.

    Raises
    ------
    DimMismatch
        If ``m`` is not a square 2-d array.
    AsymmetricInput
        If ``max|m - m.T| > rtol * max|m|``.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > rtol * max(scale, np.finfo(float).tiny):
        raise AsymmetricInput(f"matrix asymmetry {asym:.3g} exceeds {rtol:g} relative")
    return 0.5 * (a + a.T)


def _as_array(m) -> np.ndarray:
    if isinstance(m, SpdMatrix):
        return m.entries
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def _cholesky_or_none(a: np.ndarray):
    """Cholesky factor of ``a`` or None when a pivot falls below the cutoff."""
    if a.shape[0] == 0:
        return a.copy()
    dmax = np.max(np.diag(a))
    if not dmax > 0:
        return None
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(L)) ** 2 <= PIVOT_RTOL * dmax:
        return None
    return L


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric matrix tagged as positive definite or only semidefinite.

    Build instances with :meth:`from_array`, which symmetrizes the input and
    decides definiteness; the constructor itself performs no checks.
    """

    entries: np.ndarray
    positive_definite: bool

    @classmethod
    def from_array(cls, m, require_pd: bool = False) -> "SpdMatrix":
        a = symmetrize(m)
        pd = _cholesky_or_none(a) is not None
        if not pd:
            if require_pd:
                raise NotPositiveDefinite("matrix is not positive definite")
            w = np.linalg.eigvalsh(a) if a.size else np.zeros(0)
            if w.size and w[0] < -1e-10 * max(abs(w[-1]), 1.0):
                raise NotPositiveDefinite(
                    f"matrix has a negative eigenvalue ({w[0]:.3g}) and is not PSD"
                )
        a.setflags(write=False)
        return cls(a, pd)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def cholesky(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``m = L @ L.T``.

    Raises NotPositiveDefinite when a pivot is at or below
    ``1e-12 * max(diag(m))``.
    """
    a = _as_array(m)
    L = _cholesky_or_none(a)
    if L is None:
        raise NotPositiveDefinite("Cholesky pivot below tolerance")
    return L


def is_positive_definite(m) -> bool:
    return _cholesky_or_none(_as_array(m)) is not None


def log_det(m) -> float:
    L = cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def spd_inverse(m) -> np.ndarray:
    a = _as_array(m)
    L = cholesky(a)
    Linv = np.linalg.solve(L, np.eye(a.shape[0]))
    inv = Linv.T @ Linv
    return 0.5 * (inv + inv.T)


def _eigh_pd(a: np.ndarray):
    w, Q = np.linalg.eigh(a)
    if w.size and (w[-1] <= 0 or w[0] <= EIG_RTOL * w[-1]):
        raise NotPositiveDefinite("eigenvalue below tolerance")
    return w, Q


def spd_logm(m) -> np.ndarray:
    """Matrix logarithm ``Q diag(log w) Q.T`` of a positive definite matrix."""
    w, Q = _eigh_pd(_as_array(m))
    out = (Q * np.log(w)) @ Q.T
    return 0.5 * (out + out.T)


def sym_expm(m) -> np.ndarray:
    """Matrix exponential of a symmetric matrix via its eigendecomposition."""
    w, Q = np.linalg.eigh(symmetrize(m))
    out = (Q * np.exp(w)) @ Q.T
    return 0.5 * (out + out.T)


def spd_inv_sqrt(m) -> np.ndarray:
    w, Q = _eigh_pd(_as_array(m))
    out = (Q / np.sqrt(w)) @ Q.T
    return 0.5 * (out + out.T)


# Asymptotic coefficients B_{2k} / (2k) for the digamma series.
_DIGAMMA_ASYMP = np.array([
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
])
_DIGAMMA_SHIFT = 10.0


def digamma(x):
    """Digamma function for positive real arguments (scalar or array).

    Arguments below 10 are shifted upward with ``psi(x) = psi(x + 1) - 1/x``,
    then the asymptotic expansion in ``1/x**2`` is summed.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("digamma is only defined here for x > 0")
    y = xa.copy()
    acc = np.zeros_like(y)
    small = y < _DIGAMMA_SHIFT
    while np.any(small):
        acc[small] -= 1.0 / y[small]
        y[small] += 1.0
        small = y < _DIGAMMA_SHIFT
    inv2 = 1.0 / (y * y)
    series = np.zeros_like(y)
    for c in _DIGAMMA_ASYMP[::-1]:
        series = (series + c) * inv2
    out = acc + np.log(y) - 0.5 / y - series
    return float(out) if out.ndim == 0 else out


def log_multivariate_gamma(a: float, p: int) -> float:
    """``log Gamma_p(a) = p(p-1)/4 log(pi) + sum_j log Gamma(a + (1 - j)/2)``."""
    if p < 1:
        raise DomainError("dimension must be a positive integer")
    args = a + (1.0 - np.arange(1, p + 1)) / 2.0
    if np.any(args <= 0):
        raise DomainError(f"log_multivariate_gamma needs a > (p-1)/2, got a={a}, p={p}")
    return p * (p - 1) / 4.0 * math.log(math.pi) + float(np.sum(gammaln(args)))
