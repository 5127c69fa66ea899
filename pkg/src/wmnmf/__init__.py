"""Weighted multi-view nonnegative matrix factorization with learned view and observation weights."""

from .clustering import ClusteringReport, assign, score, spectral_assign
from .core import (
    FactorizationState,
    HyperParams,
    Mode,
    MultiViewDataset,
    ValidationError,
    WMNMFError,
    normalize_views,
    validate_dataset,
)
from .graph import LaplacianTriple, build_adjacency, build_laplacian
from .solver import SolverRun, audit_monotonicity, fit
from .synthgen import SynthSpec, generate, preset
from .theory import BoundInputs, dim_dependent_bound, dim_independent_bound
from .updates import objective_total, update_alpha, update_consensus, update_w

__all__ = [
    "BoundInputs", "ClusteringReport", "FactorizationState", "HyperParams", "LaplacianTriple",
    "Mode", "MultiViewDataset", "SolverRun", "SynthSpec", "ValidationError", "WMNMFError",
    "assign", "audit_monotonicity", "build_adjacency", "build_laplacian", "dim_dependent_bound",
    "dim_independent_bound", "fit", "generate", "normalize_views", "objective_total", "preset",
    "score", "spectral_assign", "update_alpha", "update_consensus", "update_w", "validate_dataset",
]
