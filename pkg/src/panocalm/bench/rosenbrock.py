"""Constrained Rosenbrock example in two encodings.

    minimize_{||u|| <= 0.73}  sum_{i=1}^{4} p2 (u_{i+1} - u_i^2)^2 + (p1 - u_i)^2
    s.t.  p3 sin(u1) = cos(u2 + u3),   u3 + u4 <= 0.2

``penalty``: both constraints go to F2 (the inequality as ``[.]_+``).
``alm``: F1 = (equality, inequality) with C = {0} x (-inf, 0].
"""
import math

import numpy as np

from ..core import ProblemDefinition, SolverConfig
from ..sets import Ball2, CartesianProduct, Rectangle, Zero

N = 5
DEFAULT_P = (1.0, 50.0, 1.5)
RADIUS = 0.73


def cost(u, p):
    a = u[1:] - u[:-1] ** 2
    b = p[0] - u[:-1]
    return float(p[1] * (a @ a) + b @ b)


def grad_cost(u, p):
    a = u[1:] - u[:-1] ** 2
    g = np.zeros(N)
    g[:-1] = -4.0 * p[1] * a * u[:-1] - 2.0 * (p[0] - u[:-1])
    g[1:] += 2.0 * p[1] * a
    return g


def constraints(u, p):
    """Raw constraint functions (equality residual, inequality ``<= 0`` residual)."""
    return np.array([p[2] * math.sin(u[0]) - math.cos(u[1] + u[2]), u[2] + u[3] - 0.2])


def _jt(u, p, w):
    s = math.sin(u[1] + u[2])
    return np.array([p[2] * math.cos(u[0]) * w[0], s * w[0], s * w[0] + w[1], w[1], 0.0])


def f2(u, p):
    h = constraints(u, p)
    h[1] = max(h[1], 0.0)
    return h


def grad_f2_sq(u, p):
    return 2.0 * _jt(u, p, f2(u, p))


def f1(u, p):
    return constraints(u, p)


def jf1_t_apply(u, p, w):
    return _jt(u, p, w)


def problem(encoding: str = "alm") -> ProblemDefinition:
    set_u = Ball2(radius=RADIUS)
    if encoding == "penalty":
        return ProblemDefinition(n=N, n_p=3, cost=cost, grad_cost=grad_cost, set_u=set_u,
                                 n2=2, f2=f2, grad_f2_sq=grad_f2_sq)
    if encoding == "alm":
        set_c = CartesianProduct([(1, Zero()), (2, Rectangle(None, [0.0]))])
        return ProblemDefinition(n=N, n_p=3, cost=cost, grad_cost=grad_cost, set_u=set_u,
                                 n1=2, f1=f1, jf1_t_apply=jf1_t_apply, set_c=set_c)
    raise ValueError(f"unknown encoding {encoding!r}")


def config(**overrides) -> SolverConfig:
    """Tolerances and penalty schedule of the reference example."""
    kw = dict(epsilon=1e-5, delta=1e-4, epsilon0=1e-4, c0=1e3, rho=5.0,
              max_outer_iters=50, max_inner_iters=5000)
    kw.update(overrides)
    return SolverConfig(**kw)
