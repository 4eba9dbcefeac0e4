"""The inner-problem merit function psi(u; c, y) and its gradient.

    psi(u) = f(u) + c/2 * [dist_C(F1(u) + y/c)^2 + ||F2(u)||^2]
    grad psi(u) = grad f(u) + c * JF1(u)^T s(u) + c/2 * grad ||F2(u)||^2

where ``s(u) = F1(u) + y/c - proj_C(F1(u) + y/c)`` is the slack vector, also
needed by the multiplier update and therefore cached.
"""
import math

import numpy as np

from .core import ProblemDefinition
from .errors import OracleFailure


class InnerOracle:
    """Evaluates psi and its gradient for fixed ``(p, c, y)``. Not thread safe."""

    def __init__(self, problem: ProblemDefinition, p, c: float, y=None):
        if not c > 0:
            raise ValueError(f"penalty must be positive, got {c}")
        self.problem = problem
        self.p = np.asarray(p, dtype=float)
        self.c = float(c)
        n1 = problem.n1
        y = np.zeros(n1) if y is None else np.asarray(y, dtype=float)
        if y.shape != (n1,):
            raise ValueError(f"multiplier has shape {y.shape}, expected ({n1},)")
        self.y = y
        self._y_over_c = y / self.c
        self._slack = np.zeros(n1)
        self._slack_at = None

    def _slack_of(self, u):
        if self._slack_at is not None and np.array_equal(self._slack_at, u):
            return self._slack
        pb = self.problem
        w = _vec(pb.f1(u, self.p), "f1") + self._y_over_c
        self._slack = w - pb.set_c.project(w)
        self._slack_at = u.copy()
        return self._slack

    def psi(self, u) -> float:
        pb = self.problem
        val = _scalar(pb.cost(u, self.p), "cost")
        pen = 0.0
        if pb.n1:
            s = self._slack_of(u)
            pen += float(s @ s)
        if pb.n2:
            f2 = _vec(pb.f2(u, self.p), "f2")
            pen += float(f2 @ f2)
        val += 0.5 * self.c * pen
        if not math.isfinite(val):
            raise OracleFailure("psi is not finite")
        return val

    def grad_psi(self, u) -> np.ndarray:
        pb = self.problem
        g = np.array(_vec(pb.grad_cost(u, self.p), "grad_cost"), dtype=float)
        if pb.n1:
            s = self._slack_of(u)
            g += self.c * _vec(pb.jf1_t_apply(u, self.p, s), "jf1_t_apply")
        if pb.n2:
            g += (0.5 * self.c) * _vec(pb.grad_f2_sq(u, self.p), "grad_f2_sq")
        return g

    def value_and_grad(self, u):
        return self.psi(u), self.grad_psi(u)

    def infeasibility_f1(self, u):
        """Slack vector at ``u`` and its infinity norm (multiply by ``c`` for the
        multiplier step)."""
        s = self._slack_of(u).copy()
        return s, float(np.max(np.abs(s))) if s.size else 0.0


def _vec(x, name):
    x = np.asarray(x, dtype=float)
    # inf/nan propagate through the sum
    if not math.isfinite(float(np.add.reduce(x, axis=None))):
        raise OracleFailure(f"{name} returned non-finite values")
    return x


def _scalar(x, name):
    x = float(x)
    if not math.isfinite(x):
        raise OracleFailure(f"{name} returned a non-finite value")
    return x
