"""Sparse recovery from quasi-linear measurements with fraction-penalty thresholding."""
from .errors import DimensionError, DomainError, ParameterError, QuasiSparseError
from .experiments import ExperimentSpec, SweepReport, generate_problem, relative_error, run_sweep, run_trial
from .operators import LinearOperator, LogShiftOperator, QuasiLinearOperator
from .penalty import PenaltyParams, prox_scalar, prox_vector, threshold_value
from .solvers import (
    Algorithm,
    RecoveryResult,
    SolverConfig,
    Termination,
    fixed_point_residual,
    ifta_solve,
    ihta_solve,
    ista_solve,
    solve,
)

__all__ = [
    "Algorithm",
    "DimensionError",
    "DomainError",
    "ExperimentSpec",
    "LinearOperator",
    "LogShiftOperator",
    "ParameterError",
    "PenaltyParams",
    "QuasiLinearOperator",
    "QuasiSparseError",
    "RecoveryResult",
    "SolverConfig",
    "SweepReport",
    "Termination",
    "fixed_point_residual",
    "generate_problem",
    "ifta_solve",
    "ihta_solve",
    "ista_solve",
    "prox_scalar",
    "prox_vector",
    "relative_error",
    "run_sweep",
    "run_trial",
    "solve",
    "threshold_value",
]

__version__ = "0.1.0"
