"""Sparse drift estimation for Lyapunov (Ornstein-Uhlenbeck equilibrium) models."""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .irrep import (
    IrrepReport,
    SupportSet,
    diag_local_irrep,
    gram_diagonal_closed_form,
    irrep_constant,
    support_of,
    weak_irrep_value,
)
from .lasso import LassoPath, LassoSolution, fit_path, kkt_residual, lambda_grid, lambda_max, solve_lasso
from .linalg import NonStableDriftError, commutation_matrix, is_stable, solve_lyapunov, stability_margin
from .metrics import (
    confusion,
    curve_aucs,
    ebic_path_select,
    ebic_select,
    gaussian_nll,
    metric_record,
    path_summary,
    restricted_mle,
)
from .model import GramSystem, build_A, build_g, build_gram
from .simulation import Dataset, RngSeed, sample_covariance, sample_gaussian, sample_volatility

__all__ = [
    "BACKEND",
    "Dataset",
    "GramSystem",
    "IrrepReport",
    "LassoPath",
    "LassoSolution",
    "NonStableDriftError",
    "RngSeed",
    "SupportSet",
    "build_A",
    "build_g",
    "build_gram",
    "commutation_matrix",
    "confusion",
    "curve_aucs",
    "diag_local_irrep",
    "ebic_path_select",
    "ebic_select",
    "fit_path",
    "gaussian_nll",
    "gram_diagonal_closed_form",
    "irrep_constant",
    "is_stable",
    "kkt_residual",
    "lambda_grid",
    "lambda_max",
    "metric_record",
    "path_summary",
    "restricted_mle",
    "sample_covariance",
    "sample_gaussian",
    "sample_volatility",
    "solve_lasso",
    "solve_lyapunov",
    "stability_margin",
    "support_of",
    "weak_irrep_value",
]
