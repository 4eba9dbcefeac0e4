"""Test-time numerical references: finite differences, grid search, call counting."""
from __future__ import annotations

import dataclasses
import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import ProblemDefinition
from .errors import NonFiniteOutput
from .sets import Rectangle


class DimensionTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FdConfig:
    step: float = 1e-6
    scheme: str = "central"

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.scheme != "central":
            raise ValueError("only central differences are supported")


def fd_gradient(func, u, cfg: FdConfig = FdConfig()) -> np.ndarray:
    """Central-difference gradient with per-coordinate step ``step * max(1, |u_i|)``."""
    u = np.array(u, dtype=float)
    g = np.empty_like(u)
    for i in range(u.shape[0]):
        h = cfg.step * max(1.0, abs(u[i]))
        ui = u[i]
        u[i] = ui + h
        fp = float(func(u))
        u[i] = ui - h
        fm = float(func(u))
        u[i] = ui
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteOutput(f"function not finite near coordinate {i}")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def grid_minimize(func, box: Rectangle, points_per_dim: int):
    """Exhaustive search over a uniform grid; the first minimiser in
    lexicographic order wins ties."""
    lo, hi = box.lower, box.upper
    if lo.shape[0] > 3:
        raise DimensionTooLarge("grid_minimize supports at most 3 dimensions")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("grid_minimize needs a bounded box")
    axes = [np.linspace(a, b, points_per_dim) for a, b in zip(lo, hi)]
    best_u, best_f = None, math.inf
    for pt in itertools.product(*axes):
        val = float(func(np.array(pt)))
        if val < best_f:
            best_u, best_f = np.array(pt), val
    return best_u, best_f


_ORACLES = ("cost", "grad_cost", "f1", "jf1_t_apply", "f2", "grad_f2_sq")


def counting_wrapper(problem: ProblemDefinition):
    """Return a copy of ``problem`` whose oracles tally their calls in a Counter."""
    counters = Counter()
    wrapped = {}
    for name in _ORACLES:
        fn = getattr(problem, name)
        if fn is None:
            continue

        def counted(*args, _fn=fn, _name=name):
            counters[_name] += 1
            return _fn(*args)

        wrapped[name] = counted
    return dataclasses.replace(problem, **wrapped), counters


def dense_lbfgs_inverse(pairs, gamma_scale: float) -> np.ndarray:
    """Explicit inverse-Hessian approximation built by the BFGS recursion.

    ``pairs`` lists ``(s, y)`` oldest first; the seed matrix is
    ``gamma_scale * I``. Reference for the two-loop recursion.
    """
    n = len(pairs[0][0]) if pairs else 0
    H = gamma_scale * np.eye(n)
    eye = np.eye(n)
    for s, y in pairs:
        rho = 1.0 / float(s @ y)
        V = eye - rho * np.outer(y, s)
        H = V.T @ H @ V + rho * np.outer(s, s)
    return H


def equality_qp_kkt(Q, q, A, b):
    """KKT pair of ``min 1/2 u'Qu + q'u  s.t.  Au = b`` by one linear solve.

    The multiplier sign follows ``grad f(u) + A' y = 0``.
    """
    Q, A = np.asarray(Q, dtype=float), np.asarray(A, dtype=float)
    n, m = Q.shape[0], A.shape[0]
    K = np.block([[Q, A.T], [A, np.zeros((m, m))]])
    sol = np.linalg.solve(K, np.concatenate([-np.asarray(q, dtype=float),
                                             np.asarray(b, dtype=float)]))
    return sol[:n], sol[n:]
