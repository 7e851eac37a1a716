"""Deflated conjugate gradients with pluggable deflation subspaces and
numerical checks of the associated convergence bounds."""

__version__ = "0.1.0"

from .analysis import (
    BoundReport,
    PerturbationSweep,
    bound_report,
    compute_gamma,
    compute_K,
    compute_xi,
    deflated_spectrum,
    kappa_eff,
    perturbation_estimate,
    perturbation_sweep,
)
from .coarse import CoarsePolicy
from .dense import sym_eig
from .krylov import CgConfig, SolveReport, cg
from .linalg import SparseMatrix, read_matrix_market, write_matrix_market
from .problems import laplace_bilinear, spectrum_matrix
from .projection import DeflatedOperator, DeflationBasis, Provenance
from .solvers import deflated_cg
from .subspaces import (
    AggregateSet,
    CfSplitting,
    PerturbationSpec,
    aggregate_restricted_eigen_basis,
    aggregation_basis,
    direct_interpolation,
    eigen_basis,
    full_coarsening,
    perturbed_eigen_basis,
)

__all__ = [
    "AggregateSet",
    "BoundReport",
    "CfSplitting",
    "CgConfig",
    "CoarsePolicy",
    "DeflatedOperator",
    "DeflationBasis",
    "PerturbationSpec",
    "PerturbationSweep",
    "Provenance",
    "SolveReport",
    "SparseMatrix",
    "aggregate_restricted_eigen_basis",
    "aggregation_basis",
    "bound_report",
    "cg",
    "compute_K",
    "compute_gamma",
    "compute_xi",
    "deflated_cg",
    "deflated_spectrum",
    "direct_interpolation",
    "eigen_basis",
    "full_coarsening",
    "kappa_eff",
    "laplace_bilinear",
    "perturbation_estimate",
    "perturbation_sweep",
    "perturbed_eigen_basis",
    "read_matrix_market",
    "spectrum_matrix",
    "sym_eig",
    "write_matrix_market",
]
