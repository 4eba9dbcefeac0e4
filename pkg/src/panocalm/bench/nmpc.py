"""Obstacle-avoidance NMPC for a kinematic bicycle, single-shooting form.

State ``x = (px, py, heading, v)``, input ``(a, steer)``; Euler discretisation.
The decision vector interleaves the inputs ``(a_0, steer_0, a_1, ...)`` and the
parameter is ``p = (x0 (4), previous applied input (2))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _backend
from ..alm import AlmSolver
from ..core import ProblemDefinition, SolverConfig
from ..sets import Rectangle

INITIAL_STATE = (-5.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class BicycleNmpcProblem:
    horizon: int = 100
    ts: float = 0.05
    length: float = 0.5
    alpha: float = 0.25
    stage_weights: tuple = (18.0, 18.0, 2.0, 5.0)
    terminal_weights: tuple = (1500.0, 1500.0, 500.0, 10.0)
    rate_weights: tuple = (100.0, 30.0)
    a_bounds: tuple = (-1.0, 2.0)
    steer_max: float = 0.25
    obstacle: tuple = (-3.0, 0.2)
    radius: float = 0.65

    @property
    def n(self):
        return 2 * self.horizon

    def rollout(self, u, x0):
        X = np.empty((self.horizon + 1, 4))
        _backend.bicycle_rollout(np.ascontiguousarray(u, dtype=float),
                                 np.ascontiguousarray(x0, dtype=float),
                                 self.ts, self.length, self.alpha, X)
        return X

    def plant_step(self, x, inp):
        """One Euler step of the model (the simulated plant equals the model)."""
        X = np.empty((2, 4))
        _backend.bicycle_rollout(np.asarray(inp, dtype=float), np.asarray(x, dtype=float),
                                 self.ts, self.length, self.alpha, X)
        return X[1].copy()

    def input_set(self):
        lo = np.tile([self.a_bounds[0], -self.steer_max], self.horizon)
        hi = np.tile([self.a_bounds[1], self.steer_max], self.horizon)
        return Rectangle(lo, hi)

    def obstacle_residual(self, X):
        """``r^2 - |pos - centre|^2`` for the predicted states ``x_1 .. x_N``."""
        dx = X[1:, 0] - self.obstacle[0]
        dy = X[1:, 1] - self.obstacle[1]
        return self.radius ** 2 - dx * dx - dy * dy

    def obstacle_vjp(self, u, X, w):
        """``sum_t w[t-1] * grad_u h(x_t)`` by an adjoint sweep."""
        out = np.empty(self.n)
        _backend.bicycle_obstacle_vjp(u, X, np.ascontiguousarray(w, dtype=float),
                                      self.obstacle[0], self.obstacle[1],
                                      self.ts, self.length, self.alpha, out)
        return out

    def cost_gradient(self, u, x0, u_prev=(0.0, 0.0)):
        """Exact cost and gradient of the eliminated NMPC cost (adjoint sweep)."""
        ev = _Evaluator(self)
        p = np.concatenate([np.asarray(x0, dtype=float), np.asarray(u_prev, dtype=float)])
        return ev.cost(u, p), ev.grad(u, p)

    def build(self, encoding: str = "penalty") -> ProblemDefinition:
        """Problem definition with the obstacle as ``F2 = [h]_+`` or ``F1 = h, C = (-inf, 0]``."""
        ev = _Evaluator(self)
        common = dict(n=self.n, n_p=6, cost=ev.cost, grad_cost=ev.grad,
                      set_u=self.input_set())
        N = self.horizon
        if encoding == "penalty":
            def f2(u, p):
                return np.maximum(self.obstacle_residual(ev.states(u, p)), 0.0)

            def grad_f2_sq(u, p):
                u, X = ev.key_states(u, p)
                # grad [h]_+^2 = 2 [h]_+ grad h, zero at the kink
                return self.obstacle_vjp(u, X, 2.0 * np.maximum(self.obstacle_residual(X), 0.0))

            return ProblemDefinition(**common, n2=N, f2=f2, grad_f2_sq=grad_f2_sq)
        if encoding == "alm":
            def f1(u, p):
                return self.obstacle_residual(ev.states(u, p))

            def jf1_t_apply(u, p, w):
                u, X = ev.key_states(u, p)
                return self.obstacle_vjp(u, X, w)

            return ProblemDefinition(**common, n1=N, f1=f1, jf1_t_apply=jf1_t_apply,
                                     set_c=Rectangle(None, np.zeros(N)))
        raise ValueError(f"unknown encoding {encoding!r}")


class _Evaluator:
    """Shares one rollout between cost, gradient and constraint oracles at the
    same ``(u, p)``."""

    def __init__(self, model: BicycleNmpcProblem):
        self.m = model
        self.qs = np.array(model.stage_weights, dtype=float)
        self.qn = np.array(model.terminal_weights, dtype=float)
        self.rw = np.array(model.rate_weights, dtype=float)
        self._key = None
        self._u = None
        self.X = np.empty((model.horizon + 1, 4))
        self._cost = 0.0
        self._grad = np.empty(model.n)
        self._has_grad = False

    def _refresh(self, u, p, want_grad):
        u = np.ascontiguousarray(u, dtype=float)
        key = u.tobytes() + np.asarray(p, dtype=float).tobytes()
        if key == self._key and (self._has_grad or not want_grad):
            return
        p = np.asarray(p, dtype=float)
        m = self.m
        self._cost = _backend.bicycle_cost_grad(
            u, np.ascontiguousarray(p[:4]), np.ascontiguousarray(p[4:6]), self.qs, self.qn,
            self.rw, m.ts, m.length, m.alpha, self.X, self._grad, want_grad)
        self._key = key
        self._u = u.copy()
        self._has_grad = want_grad

    def cost(self, u, p):
        self._refresh(u, p, False)
        return self._cost

    def grad(self, u, p):
        self._refresh(u, p, True)
        return self._grad.copy()

    def states(self, u, p):
        self._refresh(u, p, False)
        return self.X

    def key_states(self, u, p):
        self._refresh(u, p, False)
        return self._u, self.X


def single_shooting_gradient(u_seq, x0, step, step_jac, stage_grad, terminal_grad,
                             rate_weights=None, u_prev=None):
    """Gradient of an eliminated optimal-control cost by a backward adjoint sweep.

    The cost is ``sum_t l(x_t, u_t) + l_N(x_N)`` plus the optional rate term
    ``sum_t (u_t - u_{t-1})^T diag(rate_weights) (u_t - u_{t-1})`` with
    ``u_{-1} = u_prev``, where ``x_{t+1} = step(x_t, u_t)``.

    Parameters
    ----------
    u_seq : array_like, shape (N, m)
    x0 : array_like, shape (nx,)
    step : callable ``(x, u) -> x_next``
    step_jac : callable ``(x, u) -> (A, B)``
        Jacobians of ``step`` with respect to ``x`` and ``u``.
    stage_grad : callable ``(x, u) -> (l_x, l_u)``
    terminal_grad : callable ``x -> l_N'(x)``

    Returns
    -------
    ndarray, shape (N * m,)
    """
    U = np.atleast_2d(np.asarray(u_seq, dtype=float))
    N = U.shape[0]
    X = [np.asarray(x0, dtype=float)]
    for t in range(N):
        X.append(np.asarray(step(X[t], U[t]), dtype=float))
    lam = np.asarray(terminal_grad(X[N]), dtype=float)
    G = np.empty_like(U)
    for t in range(N - 1, -1, -1):
        A, B = step_jac(X[t], U[t])
        lx, lu = stage_grad(X[t], U[t])
        G[t] = np.asarray(B).T @ lam + lu
        lam = np.asarray(A).T @ lam + lx
    if rate_weights is not None:
        w = np.asarray(rate_weights, dtype=float)
        prev = np.vstack([np.zeros(U.shape[1]) if u_prev is None else u_prev, U[:-1]])
        D = 2.0 * w * (U - prev)
        G += D
        G[:-1] -= D[1:]
    return G.reshape(-1)


def default_config(**overrides) -> SolverConfig:
    kw = dict(epsilon=1e-4, delta=1e-3, epsilon0=1e-4, rho=5.0, c0=500.0, lbfgs_memory=20,
              max_outer_iters=30, max_inner_iters=500)
    kw.update(overrides)
    return SolverConfig(**kw)


@dataclass
class ClosedLoopResult:
    states: np.ndarray
    inputs: np.ndarray
    reports: list = field(default_factory=list)

    @property
    def solve_times(self):
        return np.array([r.solve_time for r in self.reports])

    def min_obstacle_clearance_sq(self, model: BicycleNmpcProblem):
        d = self.states[:, :2] - np.array(model.obstacle)
        return float(np.min(np.sum(d * d, axis=1)))

    def final_pose_error(self):
        return float(np.linalg.norm(self.states[-1, :3]))


def run_nmpc_closed_loop(encoding: str = "penalty", sim_steps: int = 300,
                         model: BicycleNmpcProblem = None, config: SolverConfig = None,
                         x0=INITIAL_STATE) -> ClosedLoopResult:
    """Receding-horizon simulation: solve, apply the first input, step the plant,
    shift the previous solution as the next warm start."""
    if sim_steps < 1:
        raise ValueError("sim_steps must be >= 1")
    model = model or BicycleNmpcProblem()
    solver = AlmSolver(model.build(encoding), config or default_config())
    x = np.array(x0, dtype=float)
    u_prev = np.zeros(2)
    guess = np.zeros(model.n)
    y_guess = None
    states = [x.copy()]
    inputs = []
    reports = []
    for _ in range(sim_steps):
        p = np.concatenate([x, u_prev])
        rep = solver.solve(p, guess, y_guess)
        reports.append(rep)
        sol = rep.solution
        u_apply = sol[:2].copy()
        x = model.plant_step(x, u_apply)
        u_prev = u_apply
        states.append(x.copy())
        inputs.append(u_apply)
        guess = np.concatenate([sol[2:], sol[-2:]])
        if encoding == "alm":
            ym = rep.lagrange_multipliers
            y_guess = np.concatenate([ym[1:], ym[-1:]])
    return ClosedLoopResult(np.array(states), np.array(inputs), reports)
