"""Augmented Lagrangian / penalty outer loop around PANOC."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    ExitStatus,
    ProblemDefinition,
    SolverConfig,
    SolverReport,
    validate_problem,
)
from .errors import DimensionMismatch, OracleFailure
from .inner import InnerOracle
from .panoc import PanocSolver
from .sets import ConstraintSet, default_y_set


def multiplier_update(y_bar, c: float, f1_val, set_c: ConstraintSet) -> np.ndarray:
    """``y_bar + c * (F1 - proj_C(F1 + y_bar / c))``."""
    y_bar = np.asarray(y_bar, dtype=float)
    f1_val = np.asarray(f1_val, dtype=float)
    return y_bar + c * (f1_val - set_c.project(f1_val + y_bar / c))


def penalty_decision(z, t, z_prev, t_prev, theta: float, nu: int,
                     rule: str = "both") -> bool:
    """Whether to multiply the penalty by rho after outer iteration ``nu``.

    ``z``/``t`` of ``None`` mark a measure the problem does not have; it takes
    no part in the decision. With ``rule="both"`` the penalty grows only when
    every present measure failed to shrink by the factor ``theta``; with
    ``rule="either"`` one such failure suffices.
    """
    if nu <= 0:
        return False
    stalled = []
    if z is not None:
        stalled.append(z > theta * z_prev)
    if t is not None:
        stalled.append(t > theta * t_prev)
    if not stalled:
        return False
    return all(stalled) if rule == "both" else any(stalled)


@dataclass
class AlmState:
    u: np.ndarray
    y: np.ndarray
    y_bar: np.ndarray
    c: float
    eps_bar: float
    z: float = math.inf
    t: float = math.inf
    z_prev: float = math.inf
    t_prev: float = math.inf
    outer_iter: int = 0
    total_inner_iters: int = 0


class AlmSolver:
    """Parametric solver for one :class:`ProblemDefinition`.

    The solver keeps the last solution, multipliers and penalty so that
    receding-horizon callers can warm start; it is not safe to share between
    threads during a solve.
    """

    def __init__(self, problem: ProblemDefinition, config: Optional[SolverConfig] = None,
                 validate: bool = True):
        if validate:
            validate_problem(problem)
        self.problem = problem
        self.config = config or SolverConfig()
        self.set_y = None
        if problem.n1:
            self.set_y = problem.set_y or default_y_set(problem.set_c, problem.n1)
        self.panoc = PanocSolver.from_config(problem.n, self.config)
        self.last_report: Optional[SolverReport] = None
        # instrumentation hook, called after every inner solve as
        # on_inner_solve(outer_iter, u_start, y_bar, c, inner_result)
        self.on_inner_solve = None

    def solve(self, p, u0=None, y0=None, c0: Optional[float] = None) -> SolverReport:
        pb, cfg = self.problem, self.config
        t_start = time.perf_counter()
        deadline = None if cfg.max_duration is None else t_start + cfg.max_duration
        p = _dims(p, pb.n_p, "parameter")
        u = np.zeros(pb.n) if u0 is None else _dims(u0, pb.n, "initial guess")
        if y0 is None:
            y0 = cfg.y0 if cfg.y0 is not None else np.zeros(pb.n1)
        y = _dims(y0, pb.n1, "initial multipliers")
        c = float(cfg.c0 if c0 is None else c0)
        if not c > 0:
            raise ValueError("initial penalty must be positive")

        st = AlmState(u=u, y=y, y_bar=y, c=c, eps_bar=cfg.epsilon0)
        status = ExitStatus.MAX_OUTER_ITERATIONS
        fpr = math.inf
        history = []
        for nu in range(cfg.max_outer_iters):
            st.outer_iter = nu + 1
            st.y_bar = self.set_y.project(st.y) if pb.n1 else st.y
            oracle = InnerOracle(pb, p, st.c, st.y_bar)
            try:
                res = self.panoc.solve(oracle, pb.set_u, st.u, st.eps_bar,
                                       cfg.max_inner_iters, deadline)
            except OracleFailure:
                status = ExitStatus.ORACLE_FAILURE
                break
            if self.on_inner_solve is not None:
                self.on_inner_solve(nu, st.u.copy(), st.y_bar.copy(), st.c, res)
            st.u = res.u
            fpr = res.fpr_norm
            st.total_inner_iters += res.iterations

            z = t = None
            try:
                if pb.n1:
                    slack, _ = oracle.infeasibility_f1(st.u)
                    # y+ = y_bar + c * (F1 - proj_C(F1 + y_bar/c)) = c * slack
                    y_next = st.c * slack
                    z = float(np.max(np.abs(y_next - st.y_bar)))
                    st.y = y_next
                if pb.n2:
                    t = float(np.max(np.abs(_finite(pb.f2(st.u, p)))))
            except OracleFailure:
                status = ExitStatus.ORACLE_FAILURE
                break
            st.z = 0.0 if z is None else z
            st.t = 0.0 if t is None else t
            history.append((st.c, st.eps_bar, st.z, st.t, res.iterations))

            if (st.z <= st.c * cfg.delta and st.t <= cfg.delta
                    and st.eps_bar <= cfg.epsilon and res.status is ExitStatus.CONVERGED):
                status = ExitStatus.CONVERGED
                break
            if res.status is ExitStatus.TIME_BUDGET_EXCEEDED or (
                    deadline is not None and time.perf_counter() > deadline):
                status = ExitStatus.TIME_BUDGET_EXCEEDED
                break
            if penalty_decision(z, t, st.z_prev, st.t_prev, cfg.theta, nu, cfg.penalty_rule):
                st.c *= cfg.rho
            st.z_prev, st.t_prev = st.z, st.t
            st.eps_bar = max(cfg.epsilon, cfg.beta * st.eps_bar)
        else:
            if res.status is ExitStatus.MAX_INNER_ITERATIONS:
                status = ExitStatus.MAX_INNER_ITERATIONS

        try:
            cost = float(pb.cost(st.u, p))
        except Exception:  # noqa: BLE001
            cost = math.nan
        report = SolverReport(
            exit_status=status,
            num_outer_iterations=st.outer_iter,
            num_inner_iterations=st.total_inner_iters,
            last_fpr_norm=fpr,
            delta_y_norm=st.z,
            f2_norm=st.t,
            penalty=st.c,
            cost=cost,
            solution=st.u.copy(),
            lagrange_multipliers=st.y.copy(),
            solve_time=time.perf_counter() - t_start,
            eps_bar=st.eps_bar,
            history=history,
        )
        self.last_report = report
        return report


def solve(problem: ProblemDefinition, config: Optional[SolverConfig] = None, p=None,
          u0=None, y0=None) -> SolverReport:
    """Solve ``problem`` at parameter ``p`` (functional entry point)."""
    if p is None:
        p = np.zeros(problem.n_p)
    return AlmSolver(problem, config).solve(p, u0, y0)


def _dims(x, n, what):
    x = np.array(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise DimensionMismatch(f"{what} has length {x.shape[0]}, expected {n}")
    return x


def _finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise OracleFailure("F2 returned non-finite values")
    return x
