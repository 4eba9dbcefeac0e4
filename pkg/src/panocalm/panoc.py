"""PANOC: projected-gradient steps blended with L-BFGS directions through a
linesearch on the forward-backward envelope, with adaptive Lipschitz estimation.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ExitStatus
from .errors import OracleFailure
from .inner import InnerOracle
from .lbfgs import LbfgsBuffer
from .sets import ConstraintSet

_MIN_LIPSCHITZ = 1e-12
_MAX_LIPSCHITZ = 1e15
_LIPSCHITZ_PROBE = 1e-6
# relative slack in the descent-lemma test, absorbs rounding when r is tiny
_LIPSCHITZ_SLACK = 1e-12


def forward_backward(oracle: InnerOracle, set_u: ConstraintSet, u, gamma: float):
    """Projected-gradient point ``proj_U(u - gamma * grad psi(u))``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return set_u.project(u - gamma * oracle.grad_psi(u))


def fbe(oracle: InnerOracle, set_u: ConstraintSet, u, gamma: float) -> float:
    """Forward-backward envelope of psi at ``u``."""
    psi, g = oracle.value_and_grad(u)
    return _fbe_from(psi, g, u - gamma * g, set_u, gamma)[0]


def _fbe_from(psi, g, w, set_u, gamma):
    u_half = set_u.project(w)
    dw = w - u_half
    return psi - 0.5 * gamma * float(g @ g) + float(dw @ dw) / (2.0 * gamma), u_half


def estimate_lipschitz(oracle: InnerOracle, u0, grad0=None) -> float:
    """Secant estimate of the Lipschitz constant of grad psi near ``u0``."""
    u0 = np.asarray(u0, dtype=float)
    if grad0 is None:
        grad0 = oracle.grad_psi(u0)
    h = _LIPSCHITZ_PROBE * np.maximum(1.0, np.abs(u0))
    dg = oracle.grad_psi(u0 + h) - grad0
    est = math.sqrt(float(dg @ dg)) / math.sqrt(float(h @ h))
    return max(est, _MIN_LIPSCHITZ)


@dataclass
class InnerResult:
    u: np.ndarray
    iterations: int
    fpr_norm: float
    status: ExitStatus
    psi: float = float("nan")
    lipschitz: float = float("nan")
    gamma: float = float("nan")
    trace: Optional[list] = None


@dataclass
class StepRecord:
    """Diagnostics of one PANOC iteration (collected when ``trace=True``)."""

    gamma: float
    sigma: float
    fbe_before: float
    fbe_after: float
    residual_sq: float
    tau: float
    lipschitz_doublings: int
    tau_halvings: int
    lbfgs_accepted: bool = field(default=False)


class PanocSolver:
    """Reusable PANOC instance (keeps its L-BFGS storage between solves)."""

    def __init__(self, n: int, lbfgs_memory: int = 10, alpha_gamma: float = 0.95,
                 sigma_coeff: float = 0.49, max_linesearch_halvings: int = 10,
                 cbfgs_epsilon: float = 1e-10):
        self.n = n
        self.lbfgs = LbfgsBuffer(n, lbfgs_memory, cbfgs_epsilon)
        self.alpha_gamma = alpha_gamma
        self.sigma_coeff = sigma_coeff
        self.max_linesearch_halvings = max_linesearch_halvings

    @classmethod
    def from_config(cls, n, config):
        return cls(n, config.lbfgs_memory, config.alpha_gamma, config.sigma_coeff,
                   config.max_linesearch_halvings, config.cbfgs_epsilon)

    def solve(self, oracle: InnerOracle, set_u: ConstraintSet, u0, epsilon: float,
              max_iters: int = 1000, deadline: Optional[float] = None,
              trace: bool = False) -> InnerResult:
        """Run PANOC from ``u0`` until the fixed-point residual test drops below
        ``epsilon``.

        ``deadline`` is an absolute :func:`time.perf_counter` value. The returned
        iterate is always the output of a projection onto ``U``.
        """
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        # overflow is detected explicitly and reported as OracleFailure
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._solve(oracle, set_u, u0, epsilon, max_iters, deadline, trace)

    def _solve(self, oracle, set_u, u0, epsilon, max_iters, deadline, trace):
        records = [] if trace else None
        lbfgs = self.lbfgs
        lbfgs.clear()
        u = np.array(u0, dtype=float)
        psi_u, g_u = oracle.value_and_grad(u)
        lip = estimate_lipschitz(oracle, u, g_u)
        gamma = self.alpha_gamma / lip
        sigma = self.sigma_coeff * gamma * (1.0 - gamma * lip)

        w = u - gamma * g_u
        u_half = set_u.project(w)
        fpr = math.inf
        status = ExitStatus.MAX_INNER_ITERATIONS
        psi_half = None
        it = 0
        while True:
            r = u - u_half
            # Lipschitz backtracking on the descent lemma
            doublings = 0
            nonfinite_retry = False
            while True:
                try:
                    psi_half = oracle.psi(u_half)
                except OracleFailure:
                    if nonfinite_retry:
                        raise
                    nonfinite_retry = True
                    psi_half = math.inf
                rr = float(r @ r)
                bound = psi_u - float(g_u @ r) + 0.5 * lip * rr
                if psi_half <= bound + _LIPSCHITZ_SLACK * max(1.0, abs(psi_u)) \
                        or lip >= _MAX_LIPSCHITZ:
                    if not math.isfinite(psi_half):
                        raise OracleFailure("psi not finite at the projected-gradient point")
                    break
                lbfgs.clear()
                lip *= 2.0
                sigma *= 0.5
                gamma *= 0.5
                doublings += 1
                w = u - gamma * g_u
                u_half = set_u.project(w)
                r = u - u_half

            g_half = oracle.grad_psi(u_half)
            res = r / gamma + g_half - g_u
            fpr = float(np.max(np.abs(res)))
            if fpr < epsilon:
                status = ExitStatus.CONVERGED
                break
            if it >= max_iters:
                break
            if deadline is not None and time.perf_counter() > deadline:
                status = ExitStatus.TIME_BUDGET_EXCEEDED
                break

            dw = w - u_half
            fbe_u = psi_u - 0.5 * gamma * float(g_u @ g_u) + float(dw @ dw) / (2.0 * gamma)
            rnorm2 = rr / (gamma * gamma)
            target = fbe_u - sigma * rnorm2
            d = lbfgs.apply(r)

            tau = 1.0
            halvings = 0
            while True:
                if halvings >= self.max_linesearch_halvings:
                    tau = 0.0
                if tau == 0.0:
                    u_plus, psi_p, g_p = u_half, psi_half, g_half
                    w_p = u_plus - gamma * g_p
                    fbe_p, uh_p = _fbe_from(psi_p, g_p, w_p, set_u, gamma)
                    break
                u_plus = u - (1.0 - tau) * r + tau * d
                try:
                    psi_p, g_p = oracle.value_and_grad(u_plus)
                except OracleFailure:
                    fbe_p = math.inf
                else:
                    w_p = u_plus - gamma * g_p
                    fbe_p, uh_p = _fbe_from(psi_p, g_p, w_p, set_u, gamma)
                if fbe_p <= target:
                    break
                tau *= 0.5
                halvings += 1

            r_plus = u_plus - uh_p
            accepted = lbfgs.update(u_plus - u, r_plus - r, math.sqrt(rnorm2))
            if records is not None:
                records.append(StepRecord(gamma, sigma, fbe_u, fbe_p, rnorm2, tau,
                                          doublings, halvings, accepted))
            u, psi_u, g_u, w, u_half = u_plus, psi_p, g_p, w_p, uh_p
            it += 1

        return InnerResult(u_half.copy(), it, fpr, status, psi_half, lip, gamma, records)


def solve_inner(oracle: InnerOracle, set_u: ConstraintSet, u0, epsilon_bar: float,
                max_iters: int = 1000, budget: Optional[float] = None,
                lbfgs_memory: int = 10, trace: bool = False, **kwargs) -> InnerResult:
    """One-shot PANOC solve; ``budget`` is a wall-clock allowance in seconds."""
    solver = PanocSolver(len(np.atleast_1d(u0)), lbfgs_memory, **kwargs)
    deadline = None if budget is None else time.perf_counter() + budget
    return solver.solve(oracle, set_u, u0, epsilon_bar, max_iters, deadline, trace)
