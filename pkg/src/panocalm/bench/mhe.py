"""Constrained moving-horizon estimation for the Lorenz system.

Decision ``u = (x_0..x_N, w_0..w_N, v_0..v_N)``; the dynamics and output
equations are equality constraints ``F1(u, y) = 0`` handled by the augmented
Lagrangian, the noise bounds form the box ``U``. The parameter is the stacked
measurement sequence ``y_0..y_N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _backend
from ..alm import AlmSolver
from ..core import ProblemDefinition, SolverConfig
from ..sets import Rectangle, Zero


@dataclass(frozen=True)
class LorenzMheProblem:
    horizon: int = 100
    h: float = 0.1
    a1: float = 10.0
    a2: float = 14.0
    a3: float = 8.0 / 3.0
    w_bound: float = 1.0
    v_bound: float = 1.5

    @property
    def n(self):
        return 8 * (self.horizon + 1)

    @property
    def n1(self):
        return 3 * self.horizon + 2 * (self.horizon + 1)

    def split(self, u):
        m = self.horizon + 1
        return (u[:3 * m].reshape(m, 3), u[3 * m:6 * m].reshape(m, 3),
                u[6 * m:].reshape(m, 2))

    def step(self, X):
        """RK4 map applied to every row of ``X``."""
        X = np.ascontiguousarray(X, dtype=float)
        out = np.empty_like(X)
        _backend.lorenz_rk4(X, self.h, self.a1, self.a2, self.a3, out)
        return out

    def step_vjp(self, X, W):
        out = np.empty_like(X)
        _backend.lorenz_rk4_vjp(np.ascontiguousarray(X), np.ascontiguousarray(W, dtype=float),
                                self.h, self.a1, self.a2, self.a3, out)
        return out

    @staticmethod
    def output(X):
        return np.stack((2.0 * X[:, 0], X[:, 1] + X[:, 2]), axis=1)

    def input_set(self):
        m = self.horizon + 1
        lo = np.concatenate([np.full(3 * m, -np.inf), np.full(3 * m, -self.w_bound),
                             np.full(2 * m, -self.v_bound)])
        hi = -lo
        return Rectangle(lo, hi)

    def build(self) -> ProblemDefinition:
        N = self.horizon
        m = N + 1

        def cost(u, p):
            _, W, V = self.split(u)
            w, v = W[:N], V[:N]
            return float(np.sum(w * w) + np.sum(v * v))

        def grad_cost(u, p):
            g = np.zeros(self.n)
            g[3 * m:6 * m - 3] = 2.0 * u[3 * m:6 * m - 3]
            g[6 * m:8 * m - 2] = 2.0 * u[6 * m:8 * m - 2]
            return g

        def f1(u, p):
            X, W, V = self.split(u)
            Y = p.reshape(m, 2)
            dyn = X[1:] - self.step(X[:-1]) - W[:-1]
            out = Y - self.output(X) - V
            return np.concatenate([dyn.reshape(-1), out.reshape(-1)])

        def jf1_t_apply(u, p, lam):
            X, _, _ = self.split(u)
            ld = lam[:3 * N].reshape(N, 3)
            lo = lam[3 * N:].reshape(m, 2)
            g = np.zeros(self.n)
            gx = g[:3 * m].reshape(m, 3)
            gx[1:] += ld
            gx[:-1] -= self.step_vjp(np.ascontiguousarray(X[:-1]), ld)
            gx[:, 0] -= 2.0 * lo[:, 0]
            gx[:, 1] -= lo[:, 1]
            gx[:, 2] -= lo[:, 1]
            g[3 * m:6 * m - 3] = -ld.reshape(-1)
            g[6 * m:] = -lo.reshape(-1)
            return g

        return ProblemDefinition(n=self.n, n_p=2 * m, cost=cost, grad_cost=grad_cost,
                                 set_u=self.input_set(), n1=self.n1, f1=f1,
                                 jf1_t_apply=jf1_t_apply, set_c=Zero(self.n1))

    def simulate(self, rng, x0=None, noise: bool = True):
        """Plant trajectory ``(X, Y, W, V)`` with uniform bounded disturbances."""
        m = self.horizon + 1
        x = np.array(rng.uniform([-5.0, -5.0, 5.0], [5.0, 5.0, 20.0]) if x0 is None else x0,
                     dtype=float)
        X = np.empty((m, 3))
        W = rng.uniform(-self.w_bound, self.w_bound, (m, 3)) if noise else np.zeros((m, 3))
        V = rng.uniform(-self.v_bound, self.v_bound, (m, 2)) if noise else np.zeros((m, 2))
        X[0] = x
        for t in range(self.horizon):
            X[t + 1] = self.step(X[t:t + 1])[0] + W[t]
        Y = self.output(X) + V
        return X, Y, W, V

    def initial_guess(self, Y):
        """States read off the outputs (x1 = y1/2, x2 = x3 = y2/2), zero noise."""
        m = self.horizon + 1
        X = np.stack((0.5 * Y[:, 0], 0.5 * Y[:, 1], 0.5 * Y[:, 1]), axis=1)
        return np.concatenate([X.reshape(-1), np.zeros(5 * m)])


def default_config(**overrides) -> SolverConfig:
    kw = dict(c0=200.0, rho=1.8, epsilon0=0.1, lbfgs_memory=15, delta=1e-5, epsilon=1e-4,
              max_outer_iters=30, max_inner_iters=5000)
    kw.update(overrides)
    return SolverConfig(**kw)


@dataclass
class MheRun:
    horizon: int
    seeds: list
    reports: list = field(default_factory=list)
    rms_errors: list = field(default_factory=list)


def run_mhe(N: int = 100, trials: int = 30, seed: int = 0,
            config: SolverConfig = None, noise: bool = True) -> MheRun:
    """Solve ``trials`` independent estimation problems on simulated data."""
    model = LorenzMheProblem(horizon=N)
    solver = AlmSolver(model.build(), config or default_config())
    run = MheRun(N, [])
    for k in range(trials):
        s = seed + k
        rng = np.random.default_rng(s)
        X, Y, _, _ = model.simulate(rng, noise=noise)
        rep = solver.solve(Y.reshape(-1), model.initial_guess(Y))
        Xh, _, _ = model.split(rep.solution)
        run.seeds.append(s)
        run.reports.append(rep)
        run.rms_errors.append(float(np.sqrt(np.mean((Xh - X) ** 2))))
    return run
