"""Problem definition, solver configuration and result types.

A problem has the form::

    minimize_{u in U}  f(u, p)
    subject to         F1(u, p) in C      (augmented Lagrangian)
                       F2(u, p) = 0       (quadratic penalty)

Gradients are user supplied. ``jf1_t_apply`` is the action
``w -> JF1(u, p)^T w`` and ``grad_f2_sq`` is the gradient of the plain squared
norm ``||F2(u, p)||^2``; the solver applies the ``c/2`` scaling itself.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    MissingOracle,
    NonFiniteOutput,
    ProblemError,
)
from .sets import ConstraintSet

Vector = np.ndarray
CostFn = Callable[[Vector, Vector], float]
MapFn = Callable[[Vector, Vector], Vector]
ActionFn = Callable[[Vector, Vector, Vector], Vector]


class ExitStatus(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_OUTER_ITERATIONS = "MaxOuterIterations"
    MAX_INNER_ITERATIONS = "MaxInnerIterations"
    TIME_BUDGET_EXCEEDED = "TimeBudgetExceeded"
    ORACLE_FAILURE = "OracleFailure"


@dataclass(frozen=True)
class ProblemDefinition:
    """Parametric problem given through its oracles.

    Parameters
    ----------
    n, n_p, n1, n2 : int
        Dimensions of ``u``, ``p``, ``F1(u, p)`` and ``F2(u, p)``.
    cost, grad_cost : callable
        ``f(u, p)`` and its gradient with respect to ``u``.
    f1, jf1_t_apply : callable, optional
        ``F1(u, p)`` and ``(u, p, w) -> JF1(u, p)^T w``. Required iff ``n1 > 0``.
    f2, grad_f2_sq : callable, optional
        ``F2(u, p)`` and the gradient of ``||F2(u, p)||^2``. Required iff ``n2 > 0``.
    set_u : ConstraintSet
        Set ``U`` onto which iterates are projected.
    set_c : ConstraintSet, optional
        Convex set ``C``; required iff ``n1 > 0``.
    set_y : ConstraintSet, optional
        Compact multiplier box ``Y``. Derived from ``set_c`` when omitted.
    """

    n: int
    n_p: int
    cost: CostFn
    grad_cost: MapFn
    set_u: ConstraintSet
    n1: int = 0
    n2: int = 0
    f1: Optional[MapFn] = None
    jf1_t_apply: Optional[ActionFn] = None
    f2: Optional[MapFn] = None
    grad_f2_sq: Optional[MapFn] = None
    set_c: Optional[ConstraintSet] = None
    set_y: Optional[ConstraintSet] = None


@dataclass(frozen=True)
class SolverConfig:
    """Tuning parameters of the outer (ALM/penalty) and inner (PANOC) loops."""

    epsilon: float = 1e-4
    delta: float = 1e-4
    epsilon0: Optional[float] = None
    beta: float = 0.1
    rho: float = 5.0
    theta: float = 0.25
    c0: float = 10.0
    y0: Optional[Vector] = None
    max_outer_iters: int = 50
    max_inner_iters: int = 2000
    max_duration: Optional[float] = None
    lbfgs_memory: int = 10
    alpha_gamma: float = 0.95
    sigma_coeff: float = 0.49
    max_linesearch_halvings: int = 10
    cbfgs_epsilon: float = 1e-10
    # "both": raise c only if neither z nor t decreased by the factor theta;
    # "either": raise c if at least one of them failed to.
    penalty_rule: str = "both"

    def __post_init__(self):
        if self.epsilon0 is None:
            object.__setattr__(self, "epsilon0", max(self.epsilon, 1e-4))
        if self.y0 is not None:
            object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float).copy())
        checks = [
            ("epsilon", _finite(self.epsilon) and self.epsilon > 0, "must be > 0"),
            ("delta", _finite(self.delta) and self.delta > 0, "must be > 0"),
            ("epsilon0", _finite(self.epsilon0) and self.epsilon0 >= self.epsilon,
             "must be >= epsilon"),
            ("beta", 0 < self.beta < 1, "must lie in (0, 1)"),
            ("rho", _finite(self.rho) and self.rho > 1, "must be > 1"),
            ("theta", 0 < self.theta < 1, "must lie in (0, 1)"),
            ("c0", _finite(self.c0) and self.c0 > 0, "must be > 0"),
            ("max_outer_iters", _posint(self.max_outer_iters), "must be a positive integer"),
            ("max_inner_iters", _posint(self.max_inner_iters), "must be a positive integer"),
            ("max_duration", self.max_duration is None or self.max_duration > 0,
             "must be None or > 0"),
            ("lbfgs_memory", _posint(self.lbfgs_memory), "must be a positive integer"),
            ("alpha_gamma", 0 < self.alpha_gamma < 1, "must lie in (0, 1)"),
            ("sigma_coeff", 0 < self.sigma_coeff < 0.5, "must lie in (0, 0.5)"),
            ("max_linesearch_halvings",
             isinstance(self.max_linesearch_halvings, int) and self.max_linesearch_halvings >= 0,
             "must be a non-negative integer"),
            ("cbfgs_epsilon", _finite(self.cbfgs_epsilon) and self.cbfgs_epsilon >= 0,
             "must be >= 0"),
            ("penalty_rule", self.penalty_rule in ("both", "either"),
             "must be 'both' or 'either'"),
        ]
        for name, ok, why in checks:
            if not ok:
                raise ConfigError(f"{name}={getattr(self, name)!r} {why}")
        if self.y0 is not None and not np.all(np.isfinite(self.y0)):
            raise ConfigError("y0 must be finite")


def _finite(x) -> bool:
    try:
        return math.isfinite(x)
    except TypeError:
        return False


def _posint(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x >= 1


@dataclass
class SolverReport:
    exit_status: ExitStatus
    num_outer_iterations: int
    num_inner_iterations: int
    last_fpr_norm: float
    delta_y_norm: float
    f2_norm: float
    penalty: float
    cost: float
    solution: Vector
    lagrange_multipliers: Vector
    solve_time: float
    eps_bar: float = float("nan")
    # per outer iteration: (c, eps_bar, z, t, inner iterations)
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.exit_status is ExitStatus.CONVERGED


def _probe(name, fn, args, expected_len):
    try:
        out = fn(*args)
    except Exception as exc:
        raise ProblemError(f"{name} raised {type(exc).__name__}: {exc}") from exc
    arr = np.asarray(out, dtype=float)
    if expected_len is None:
        if arr.size != 1:
            raise DimensionMismatch(f"{name} must return a scalar, got shape {arr.shape}")
    elif arr.ndim != 1 or arr.shape[0] != expected_len:
        raise DimensionMismatch(
            f"{name} returned shape {arr.shape}, expected ({expected_len},)")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteOutput(f"{name} returned non-finite values at the zero probe")
    return arr


def validate_problem(problem: ProblemDefinition) -> bool:
    """Check the structural invariants of ``problem`` and probe its oracles at zero.

    Returns ``True`` on success, raises a :class:`ProblemError` subclass otherwise.
    """
    pb = problem
    if not _posint(pb.n):
        raise DimensionMismatch(f"n must be a positive integer, got {pb.n!r}")
    for name in ("n_p", "n1", "n2"):
        val = getattr(pb, name)
        if not isinstance(val, int) or val < 0:
            raise DimensionMismatch(f"{name} must be a non-negative integer, got {val!r}")
    if pb.cost is None or pb.grad_cost is None:
        raise MissingOracle("cost and grad_cost are required")
    if pb.set_u is None:
        raise MissingOracle("set_u is required")

    alm_parts = {"f1": pb.f1, "jf1_t_apply": pb.jf1_t_apply, "set_c": pb.set_c}
    if pb.n1 > 0:
        missing = [k for k, v in alm_parts.items() if v is None]
        if missing:
            raise MissingOracle(f"n1={pb.n1} but {', '.join(missing)} missing")
    elif any(v is not None for v in alm_parts.values()):
        raise MissingOracle("f1/jf1_t_apply/set_c given but n1 = 0")
    pen_parts = {"f2": pb.f2, "grad_f2_sq": pb.grad_f2_sq}
    if pb.n2 > 0:
        missing = [k for k, v in pen_parts.items() if v is None]
        if missing:
            raise MissingOracle(f"n2={pb.n2} but {', '.join(missing)} missing")
    elif any(v is not None for v in pen_parts.values()):
        raise MissingOracle("f2/grad_f2_sq given but n2 = 0")

    if pb.set_u.dim is not None and pb.set_u.dim != pb.n:
        raise DimensionMismatch(f"set_u has dimension {pb.set_u.dim}, expected {pb.n}")
    for name in ("set_c", "set_y"):
        s = getattr(pb, name)
        if s is not None and s.dim is not None and s.dim != pb.n1:
            raise DimensionMismatch(f"{name} has dimension {s.dim}, expected {pb.n1}")

    u = np.zeros(pb.n)
    p = np.zeros(pb.n_p)
    _probe("cost", pb.cost, (u, p), None)
    _probe("grad_cost", pb.grad_cost, (u, p), pb.n)
    if pb.n1 > 0:
        _probe("f1", pb.f1, (u, p), pb.n1)
        _probe("jf1_t_apply", pb.jf1_t_apply, (u, p, np.zeros(pb.n1)), pb.n)
    if pb.n2 > 0:
        _probe("f2", pb.f2, (u, p), pb.n2)
        _probe("grad_f2_sq", pb.grad_f2_sq, (u, p), pb.n)
    return True
