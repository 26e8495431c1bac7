"""Penalized EM for sparse Wishart mixtures."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import init as _init
from .covglasso import PenaltySpec, covglasso_fit
from .errors import (
    DegenerateFit,
    DimMismatch,
    EmptyComponent,
    NotPositiveDefinite,
    NumericalFailure,
    TooFewObservations,
    ValidationError,
)
from .linalg import _cholesky_or_none, log_det, symmetrize
from .wishart import LOG2, solve_dof_clamped, wishart_logpdf_batch

logger = logging.getLogger(__name__)

JITTER = 1e-6
COUNT_EPS = 1e-6
# a component carrying about one matrix has an unbounded likelihood (nu -> inf)
MIN_COUNT = 1.5


@dataclass
class Dataset:
    """``n`` observed ``p x p`` matrices with cached log-determinants.

    Build with :meth:`from_matrices`; positive semidefinite inputs are made
    definite by adding ``1e-6 * tr(Gamma)/p`` to the diagonal and flagged in
    ``jittered``.
    """

    matrices: np.ndarray
    ids: list
    logdets: np.ndarray
    jittered: np.ndarray
    _dist: np.ndarray | None = field(default=None, repr=False, compare=False)
    _merges: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_matrices(cls, matrices, ids=None, jitter: float = JITTER) -> "Dataset":
        mats = [symmetrize(m) for m in matrices]
        if not mats:
            raise ValidationError("dataset needs at least one matrix")
        p = mats[0].shape[0]
        if any(m.shape != (p, p) for m in mats):
            raise DimMismatch("all matrices must share the same dimension")
        stack = np.empty((len(mats), p, p))
        jittered = np.zeros(len(mats), dtype=bool)
        for i, m in enumerate(mats):
            if _cholesky_or_none(m) is None:
                if np.linalg.eigvalsh(m)[0] < -1e-10 * max(np.abs(m).max(), 1.0):
                    raise NotPositiveDefinite(f"observation {i} is not positive semidefinite")
                bump = jitter * np.trace(m) / p
                if not bump > 0:
                    raise NotPositiveDefinite(f"observation {i} is the zero matrix")
                m = m + bump * np.eye(p)
                jittered[i] = True
            stack[i] = m
        if ids is None:
            ids = [f"m{i:04d}" for i in range(len(mats))]
        ids = [str(x) for x in ids]
        if len(ids) != len(mats):
            raise ValidationError("ids and matrices differ in length")
        logdets = np.array([log_det(m) for m in stack])
        return cls(stack, ids, logdets, jittered)

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def p(self) -> int:
        return self.matrices.shape[1]

    def distances(self) -> np.ndarray:
        if self._dist is None:
            self._dist = _init.riemannian_distance_matrix(self.matrices)
        return self._dist

    def linkage(self) -> np.ndarray:
        if self._merges is None:
            self._merges = _init.ward_linkage(self.distances())
        return self._merges

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.matrices[index], [self.ids[i] for i in index], self.logdets[index], self.jittered[index]
        )


@dataclass
class MixtureParams:
    tau: np.ndarray
    sigmas: np.ndarray
    dofs: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        self.dofs = np.asarray(self.dofs, dtype=float)
        K = self.tau.size
        if self.sigmas.shape[0] != K or self.dofs.size != K:
            raise DimMismatch("tau, sigmas and dofs disagree on K")

    @property
    def K(self) -> int:
        return self.tau.size

    @property
    def p(self) -> int:
        return self.sigmas.shape[1]

    def copy(self) -> "MixtureParams":
        return MixtureParams(self.tau.copy(), self.sigmas.copy(), self.dofs.copy())

    def permuted(self, order) -> "MixtureParams":
        order = np.asarray(order)
        return MixtureParams(self.tau[order], self.sigmas[order], self.dofs[order])


@dataclass
class Responsibilities:
    z: np.ndarray

    @property
    def soft_counts(self) -> np.ndarray:
        return self.z.sum(axis=0)

    @property
    def map_labels(self) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest index
        return np.argmax(self.z, axis=1)


@dataclass
class FitConfig:
    epsilon: float = 1e-6
    max_iter: int = 500
    restarts: int = 0
    seed: int = 0
    covglasso_tol: float = 1e-8
    covglasso_max_sweeps: int = 500
    nu_max: float = 1e5
    count_eps: float = COUNT_EPS
    min_count: float = MIN_COUNT


@dataclass
class FitResult:
    params: MixtureParams
    resp: Responsibilities
    pen_loglik_trace: list
    loglik: float
    d0: int
    bic: float
    n_iter: int
    converged: bool
    seed: int
    lam: float
    penalty_id: str
    init_labels: np.ndarray | None = None
    retried: bool = False

    @property
    def labels(self) -> np.ndarray:
        return self.resp.map_labels

    @property
    def pen_loglik(self) -> float:
        return self.pen_loglik_trace[-1]


def log_weighted_densities(data: Dataset, params: MixtureParams) -> np.ndarray:
    """``(n, K)`` matrix of ``log tau_k + log f_W(Gamma_i; Sigma_k, nu_k)``."""
    if params.p != data.p:
        raise DimMismatch(f"parameters have p={params.p}, data p={data.p}")
    out = np.empty((data.n, params.K))
    with np.errstate(divide="ignore"):
        logtau = np.log(params.tau)
    for k in range(params.K):
        out[:, k] = logtau[k] + wishart_logpdf_batch(data.matrices, data.logdets, params.sigmas[k], params.dofs[k])
    return out


def _row_logsumexp(a: np.ndarray):
    m = a.max(axis=1)
    if not np.all(np.isfinite(m)):
        raise NumericalFailure("an observation has zero density under every component")
    shifted = a - m[:, None]
    s = np.exp(shifted).sum(axis=1)
    return m + np.log(s), shifted, s


def e_step(data: Dataset, params: MixtureParams, logdens: np.ndarray | None = None) -> Responsibilities:
    """Posterior membership probabilities, computed in log space."""
    if logdens is None:
        logdens = log_weighted_densities(data, params)
    _, shifted, s = _row_logsumexp(logdens)
    z = np.exp(shifted) / s[:, None]
    return Responsibilities(z)


def penalized_loglik(data: Dataset, params: MixtureParams, penalty: PenaltySpec, logdens=None):
    """Return ``(penalized, unpenalized)`` log-likelihood."""
    if logdens is None:
        logdens = log_weighted_densities(data, params)
    lse, _, _ = _row_logsumexp(logdens)
    unpen = float(np.sum(lse))
    pen = unpen - sum(penalty.value(params.sigmas[k]) for k in range(params.K))
    return pen, unpen


def _check_counts(counts: np.ndarray, eps: float) -> None:
    bad = np.flatnonzero(counts < eps)
    if bad.size:
        raise EmptyComponent(f"component {bad[0]} has soft count {counts[bad[0]]:.3g}", int(bad[0]))


def m_step_tau(resp: Responsibilities, n: int, count_eps: float = COUNT_EPS) -> np.ndarray:
    counts = resp.soft_counts
    _check_counts(counts, count_eps)
    return counts / n


def m_step_nu(data: Dataset, resp: Responsibilities, prev_sigmas, nu_max: float = 1e5,
              count_eps: float = COUNT_EPS) -> np.ndarray:
    """Degrees of freedom per component, solved against the previous scales."""
    counts = resp.soft_counts
    _check_counts(counts, count_eps)
    p = data.p
    out = np.empty(resp.z.shape[1])
    for k in range(out.size):
        zk = resp.z[:, k]
        lhs = float(np.dot(zk, data.logdets - log_det(prev_sigmas[k]) - p * LOG2))
        out[k] = solve_dof_clamped(lhs, float(counts[k]), p, nu_max)
    return out


def weighted_scatter(data: Dataset, resp: Responsibilities, dofs) -> np.ndarray:
    """``S_k = sum_i z_ik Gamma_i / (n_k nu_k)`` for every component."""
    counts = resp.soft_counts
    S = np.einsum("ik,ijh->kjh", resp.z, data.matrices)
    S /= (counts * np.asarray(dofs))[:, None, None]
    return 0.5 * (S + np.swapaxes(S, 1, 2))


def m_step_sigma(data: Dataset, resp: Responsibilities, dofs, prev_sigmas, penalty: PenaltySpec,
                 config: FitConfig | None = None, count_eps: float = COUNT_EPS) -> np.ndarray:
    """Scale matrices: the weighted scatter when ``lam == 0``, otherwise a
    covariance graphical lasso with ``rho = 2 lam / (n_k nu_k)`` warm
    started at the previous scale."""
    config = config or FitConfig()
    counts = resp.soft_counts
    _check_counts(counts, count_eps)
    S = weighted_scatter(data, resp, dofs)
    if penalty.lam == 0:
        return S
    out = np.empty_like(S)
    for k in range(S.shape[0]):
        rho = 2.0 * penalty.lam / (counts[k] * dofs[k])
        sol = covglasso_fit(
            S[k], rho, penalty.weights, sigma_init=prev_sigmas[k],
            tol=config.covglasso_tol, max_sweeps=config.covglasso_max_sweeps,
        )
        out[k] = sol.sigma
    return out


def count_nonzero_params(params: MixtureParams) -> int:
    """Free parameters not shrunk to zero: weights, dofs, diagonals and
    nonzero upper-triangular scale entries."""
    K, p = params.K, params.p
    iu = np.triu_indices(p, 1)
    off = sum(int(np.count_nonzero(params.sigmas[k][iu])) for k in range(K))
    return (K - 1) + K + K * p + off


def bic_value(loglik: float, d0: int, n: int) -> float:
    return 2.0 * loglik - d0 * np.log(n)


def _run_em(data, params, penalty, config, seed, init_labels=None) -> FitResult:
    n = data.n
    logdens = log_weighted_densities(data, params)
    pen, unpen = penalized_loglik(data, params, penalty, logdens)
    trace = [pen]
    resp = None
    converged = False
    it = 0
    # the floor must stay attainable when K is close to n
    floor = min(config.min_count, 0.5 * n / params.K)
    for it in range(1, config.max_iter + 1):
        resp = e_step(data, params, logdens)
        _check_counts(resp.soft_counts, floor)
        tau = m_step_tau(resp, n, config.count_eps)
        dofs = m_step_nu(data, resp, params.sigmas, config.nu_max, config.count_eps)
        sigmas = m_step_sigma(data, resp, dofs, params.sigmas, penalty, config, config.count_eps)
        params = MixtureParams(tau, sigmas, dofs)
        logdens = log_weighted_densities(data, params)
        pen, unpen = penalized_loglik(data, params, penalty, logdens)
        trace.append(pen)
        if abs(trace[-1] - trace[-2]) <= config.epsilon:
            converged = True
            break
    d0 = count_nonzero_params(params)
    return FitResult(
        params=params,
        resp=resp,
        pen_loglik_trace=trace,
        loglik=unpen,
        d0=d0,
        bic=bic_value(unpen, d0, n),
        n_iter=it,
        converged=converged,
        seed=seed,
        lam=penalty.lam,
        penalty_id=penalty.penalty_id,
        init_labels=None if init_labels is None else np.asarray(init_labels),
    )


def fit_em(
    data: Dataset,
    K: int,
    penalty: PenaltySpec,
    config: FitConfig | None = None,
    init_labels=None,
    init_params: MixtureParams | None = None,
) -> FitResult:
    """Fit a ``K``-component sparse Wishart mixture by penalized EM.

    Starting values come from ``init_params`` (warm start), else from
    ``init_labels``, else from Ward clustering on Riemannian distances.
    Each iteration runs E-step, then weights, degrees of freedom (against
    the previous scales) and scales.  Iteration stops once the penalized
    log-likelihood changes by at most ``config.epsilon``.

    If a component empties, the smallest initial cluster is grown around
    its medoid and the fit retried once; a second failure raises
    :class:`DegenerateFit`.  ``config.restarts`` extra fits from randomly
    perturbed partitions are run and the best penalized likelihood kept.
    """
    config = config or FitConfig()
    if penalty.weights.shape != (data.p, data.p):
        raise DimMismatch(f"penalty is {penalty.weights.shape}, data p={data.p}")
    if not 1 <= K <= data.n:
        raise TooFewObservations(f"K={K} exceeds the number of observations n={data.n}")

    if init_params is not None:
        if init_params.K != K:
            raise ValidationError(f"warm start has K={init_params.K}, expected {K}")
        try:
            return _run_em(data, init_params.copy(), penalty, config, config.seed)
        except EmptyComponent as exc:
            logger.info("warm start degenerated (%s); restarting from a partition", exc)

    labels = initialize_partition_or(data, K, init_labels)
    best = _fit_from_labels(data, labels, penalty, config)
    if config.restarts:
        rng = np.random.default_rng(config.seed)
        for _ in range(config.restarts):
            alt = _init.perturb_partition(labels, rng)
            try:
                res = _fit_from_labels(data, alt, penalty, config)
            except DegenerateFit:
                continue
            if res.pen_loglik > best.pen_loglik:
                best = res
    return best


def initialize_partition_or(data, K, labels=None) -> np.ndarray:
    if labels is None:
        return _init.initialize_partition(data, K)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (data.n,):
        raise DimMismatch("init_labels must have one entry per observation")
    return labels


def _fit_from_labels(data, labels, penalty, config) -> FitResult:
    try:
        params = _init.init_params_from_partition(data, labels)
        return _run_em(data, params, penalty, config, config.seed, labels)
    except EmptyComponent as exc:
        logger.info("empty component (%s); retrying from a perturbed partition", exc)
    if data.n < 2:
        raise DegenerateFit("cannot perturb a single-observation partition")
    alt = _init.grow_smallest_cluster(labels, data.distances())
    try:
        params = _init.init_params_from_partition(data, alt)
        res = _run_em(data, params, penalty, config, config.seed, alt)
    except EmptyComponent as exc:
        raise DegenerateFit(f"component degenerated again after perturbation: {exc}") from exc
    res.retried = True
    return res
