"""Sparse Wishart mixture clustering of positive definite matrices."""
from .covglasso import (
    CovglassoSolution,
    PenaltySpec,
    build_penalty_allones,
    build_penalty_from_prior,
    covglasso_fit,
    covglasso_objective,
    rho_max,
)
from .em import (
    Dataset,
    FitConfig,
    FitResult,
    MixtureParams,
    Responsibilities,
    e_step,
    fit_em,
    penalized_loglik,
)
from .errors import *  # noqa: F401,F403
from .init import initialize_partition, riemannian_distance, riemannian_distance_matrix
from .metrics import adjusted_rand_index, f1_support, frobenius_distance, match_clusters
from .select import SelectionGrid, SelectionTable, auto_lambda_grid, grid_search, lambda_max
from .simulate import SimSpec, make_block_sigma, make_er_sigma, sample_mixture
from .wishart import WishartComponent, solve_dof, wishart_logpdf, wishart_sample

__version__ = "0.1.0"
