"""Synthetic Wishart-mixture data with known scale-matrix sparsity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .em import Dataset, MixtureParams
from .errors import NotPositiveDefinite, ValidationError
from .linalg import _cholesky_or_none, symmetrize
from .wishart import WishartComponent, wishart_sample


def make_block_sigma(
    p: int,
    block_size: int,
    within: float,
    between: float = 0.0,
    base_var: float = 1.0,
    phase: int | None = None,
) -> np.ndarray:
    """Block-structured scale matrix.

    Consecutive blocks of ``block_size`` variables (the last one possibly
    shorter) get off-diagonal value ``within``; pairs in different blocks
    get ``between``.  With ``phase`` 0 or 1 only every other block is filled,
    starting from the first or second block, so two components built with
    opposite phases have disjoint supports.
    """
    if block_size < 1:
        raise ValidationError("block_size must be positive")
    block = np.arange(p) // block_size
    same = block[:, None] == block[None, :]
    if phase is not None:
        if phase not in (0, 1):
            raise ValidationError("phase must be 0, 1 or None")
        active = (block % 2) == phase
        same &= active[:, None]
    S = np.where(same, within, between).astype(float)
    np.fill_diagonal(S, base_var)
    if _cholesky_or_none(S) is None:
        raise NotPositiveDefinite("block parameters give a matrix that is not positive definite")
    return S


def make_er_sigma(
    p: int,
    edge_prob: float,
    value_range=(0.3, 0.7),
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Scale matrix supported on an Erdos-Renyi graph.

    Edge values are uniform on ``value_range`` with random signs.  The
    diagonal is ``max(1, 1.1 * spectral radius of the off-diagonal part)``,
    which makes the matrix positive definite without touching the support.
    """
    if not 0.0 <= edge_prob <= 1.0:
        raise ValidationError("edge_prob must lie in [0, 1]")
    rng = rng if rng is not None else np.random.default_rng()
    lo, hi = value_range
    iu = np.triu_indices(p, 1)
    m = iu[0].size
    edges = rng.random(m) < edge_prob
    vals = rng.uniform(lo, hi, size=m) * rng.choice([-1.0, 1.0], size=m)
    off = np.zeros((p, p))
    off[iu] = np.where(edges, vals, 0.0)
    off = off + off.T
    radius = float(np.max(np.abs(np.linalg.eigvalsh(off)))) if p else 0.0
    S = off + max(1.0, 1.1 * radius) * np.eye(p)
    if _cholesky_or_none(S) is None:  # pragma: no cover - guaranteed by construction
        raise NotPositiveDefinite("Erdos-Renyi scale matrix is not positive definite")
    return S


@dataclass
class SimSpec:
    """Simulation design.

    ``sigma_specs`` entries are dicts with ``type`` one of ``"blocks"``
    (keys of :func:`make_block_sigma`), ``"erdos-renyi"`` (``edge_prob``,
    ``value_range``) or ``"explicit"`` (``matrix``).
    """

    n: int
    p: int
    K: int
    tau: list
    dofs: list
    sigma_specs: list
    seed: int = 0
    extras: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n < 1 or self.p < 1 or self.K < 1:
            raise ValidationError("n, p and K must be positive integers")
        for name in ("tau", "dofs", "sigma_specs"):
            if len(getattr(self, name)) != self.K:
                raise ValidationError(f"{name} must have K={self.K} entries")
        tau = np.asarray(self.tau, dtype=float)
        if np.any(tau < 0) or abs(tau.sum() - 1.0) > 1e-9:
            raise ValidationError("tau must be nonnegative and sum to 1")
        for nu in self.dofs:
            if not nu > self.p - 1:
                raise ValidationError(f"dofs entry {nu} must exceed p - 1 = {self.p - 1}")

    @classmethod
    def replica_design(cls, seed: int = 0, n: int = 200, p: int = 25) -> "SimSpec":
        """Three components: two alternated-block scales and one Erdos-Renyi
        scale, equal weights, degrees of freedom 30, 30 and 40."""
        return cls(
            n=n, p=p, K=3,
            tau=[1 / 3, 1 / 3, 1 / 3],
            dofs=[30.0, 30.0, 40.0],
            sigma_specs=[
                {"type": "blocks", "block_size": 5, "within": 0.6, "base_var": 1.0, "phase": 0},
                {"type": "blocks", "block_size": 5, "within": 0.6, "base_var": 1.0, "phase": 1},
                {"type": "erdos-renyi", "edge_prob": 0.1, "value_range": [0.3, 0.7]},
            ],
            seed=seed,
        )


def build_sigma(desc: dict, p: int, rng: np.random.Generator) -> np.ndarray:
    kind = desc.get("type")
    if kind == "blocks":
        return make_block_sigma(
            p,
            int(desc.get("block_size", 5)),
            float(desc.get("within", 0.6)),
            float(desc.get("between", 0.0)),
            float(desc.get("base_var", 1.0)),
            desc.get("phase"),
        )
    if kind == "erdos-renyi":
        return make_er_sigma(p, float(desc.get("edge_prob", 0.1)), tuple(desc.get("value_range", (0.3, 0.7))), rng)
    if kind == "explicit":
        S = symmetrize(desc["matrix"])
        if S.shape != (p, p):
            raise ValidationError(f"explicit matrix has shape {S.shape}, expected ({p}, {p})")
        if _cholesky_or_none(S) is None:
            raise NotPositiveDefinite("explicit scale matrix is not positive definite")
        return S
    raise ValidationError(f"unknown sigma spec type {kind!r}")


def sample_mixture(spec: SimSpec):
    """Draw a dataset from ``spec``.

    Returns ``(dataset, labels, params)`` where labels are 0-based component
    indices.  Scale matrices are built first, then labels, then the draws,
    all from one generator seeded with ``spec.seed``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sigmas = np.stack([build_sigma(d, spec.p, rng) for d in spec.sigma_specs])
    tau = np.asarray(spec.tau, dtype=float)
    labels = rng.choice(spec.K, size=spec.n, p=tau / tau.sum())
    mats = np.empty((spec.n, spec.p, spec.p))
    for k in range(spec.K):
        idx = np.flatnonzero(labels == k)
        if idx.size:
            mats[idx] = wishart_sample(WishartComponent(sigmas[k], float(spec.dofs[k])), rng, size=idx.size)
    data = Dataset.from_matrices(mats)
    return data, labels, MixtureParams(tau, sigmas, np.asarray(spec.dofs, dtype=float))
