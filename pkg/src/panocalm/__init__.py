"""PANOC inner solver inside an augmented Lagrangian / penalty outer loop.

Typical use::

    from panocalm import AlmSolver, ProblemDefinition, SolverConfig
    report = AlmSolver(problem, SolverConfig(epsilon=1e-5)).solve(p)
"""
from ._backend import BACKEND
from .alm import AlmSolver, multiplier_update, penalty_decision, solve
from .core import ExitStatus, ProblemDefinition, SolverConfig, SolverReport, validate_problem
from .errors import (
    ConfigError,
    DimensionMismatch,
    MissingOracle,
    NonFiniteOutput,
    OracleFailure,
    ProblemError,
    UnsupportedSetForDefaultY,
)
from .inner import InnerOracle
from .lbfgs import LbfgsBuffer
from .panoc import InnerResult, PanocSolver, solve_inner
from .sets import (
    Ball2,
    BallInf,
    CartesianProduct,
    ConstraintSet,
    FiniteSet,
    Rectangle,
    SecondOrderCone,
    WholeSpace,
    Zero,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AlmSolver", "multiplier_update", "penalty_decision", "solve",
    "ExitStatus", "ProblemDefinition", "SolverConfig", "SolverReport", "validate_problem",
    "ConfigError", "DimensionMismatch", "MissingOracle", "NonFiniteOutput", "OracleFailure",
    "ProblemError", "UnsupportedSetForDefaultY", "InnerOracle", "LbfgsBuffer", "InnerResult",
    "PanocSolver", "solve_inner", "Ball2", "BallInf", "CartesianProduct", "ConstraintSet",
    "FiniteSet", "Rectangle", "SecondOrderCone", "WholeSpace", "Zero",
]
