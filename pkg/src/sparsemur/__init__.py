"""Sparse non-negative least squares and sparse NMF via multiplicative
updates derived from scale-mixture priors."""

__version__ = "0.1.0"

from .baselines import SupportSet, nn_bomp, nnls_active_set, topk_refine
from .blocksparse import BlockStructure, block_mur_step, block_stats
from .diagnostics import KktReport, kkt_residual, q_function, sparsity_profile
from .estimators import SparseNMF, SparseNNLS
from .exceptions import (
    ConvergenceError,
    NegativeEntryError,
    NumericalError,
    ParseError,
    ShapeMismatchError,
    ValidationError,
)
from .priors import PriorSpec, density, neg_log_prior, penalty_gradient, weight_matrix
from .snmf import FactorizationResult, snmf_objective, snmf_solve
from .snnls import AnnealSchedule, SolverConfig, SolverResult, mur_step, objective, snnls_solve

__all__ = [
    "AnnealSchedule",
    "BlockStructure",
    "ConvergenceError",
    "FactorizationResult",
    "KktReport",
    "NegativeEntryError",
    "NumericalError",
    "ParseError",
    "PriorSpec",
    "ShapeMismatchError",
    "SolverConfig",
    "SolverResult",
    "SparseNMF",
    "SparseNNLS",
    "SupportSet",
    "ValidationError",
    "block_mur_step",
    "block_stats",
    "density",
    "kkt_residual",
    "mur_step",
    "neg_log_prior",
    "nn_bomp",
    "nnls_active_set",
    "objective",
    "penalty_gradient",
    "q_function",
    "snmf_objective",
    "snmf_solve",
    "snnls_solve",
    "sparsity_profile",
    "topk_refine",
    "weight_matrix",
]
