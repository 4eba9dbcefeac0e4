"""Quick invariant checks run by ``panocalm selftest``.

Each check returns ``(name, passed, detail)``; they use fixed seeds and finish
in a few seconds.
"""
from __future__ import annotations

import numpy as np

from . import _backend, sets
from .alm import AlmSolver
from .core import ProblemDefinition, SolverConfig
from .inner import InnerOracle
from .lbfgs import LbfgsBuffer
from .oracle import dense_lbfgs_inverse, equality_qp_kkt, fd_gradient


def check_projections(rng):
    cases = [
        sets.Ball2(1.3, [0.5, -1.0, 2.0]),
        sets.BallInf(0.7),
        sets.Rectangle([-1.0, None, 0.0], [1.0, 2.0, None]),
        sets.SecondOrderCone(1.5),
        sets.CartesianProduct([(1, sets.Zero()), (3, sets.Ball2(1.0))]),
    ]
    worst = 0.0
    for s in cases:
        for _ in range(200):
            x = 3.0 * rng.normal(size=3)
            p = s.project(x)
            worst = max(worst, float(np.max(np.abs(s.project(p) - p))))
            # variational inequality against projections of other points
            q = s.project(3.0 * rng.normal(size=3))
            if float((x - p) @ (q - p)) > 1e-9 * (1.0 + np.linalg.norm(x)):
                return "projections", False, f"variational inequality fails for {s!r}"
    return "projections", worst <= 1e-12, f"idempotence error {worst:.1e}"


def check_lbfgs(rng):
    n = 8
    buf = LbfgsBuffer(n, 5)
    pairs = []
    for _ in range(9):
        s = rng.normal(size=n)
        M = rng.normal(size=(n, n))
        y = (M @ M.T + n * np.eye(n)) @ s
        if buf.update(s, y, 1.0):
            pairs.append((s, y))
    H = dense_lbfgs_inverse(pairs[-5:], buf.gamma_scale)
    r = rng.normal(size=n)
    err = float(np.max(np.abs(buf.apply(r) + H @ r)))
    return "lbfgs two-loop", err <= 1e-10, f"max deviation {err:.1e}"


def check_kernels(rng):
    if _backend.BACKEND != "compiled":
        return "kernels", True, "compiled extension unavailable, python backend only"
    X = rng.normal(size=(6, 3))
    W = rng.normal(size=(6, 3))
    outs = []
    for b in ("compiled", "python"):
        out = np.empty_like(X)
        _backend.get("lorenz_rk4_vjp", b)(X, W, 0.1, 10.0, 14.0, 8.0 / 3.0, out)
        outs.append(out)
    err = float(np.max(np.abs(outs[0] - outs[1])))
    return "kernels", err <= 1e-12, f"compiled vs python {err:.1e}"


def check_gradients(rng):
    from .bench import mhe, nmpc, rosenbrock

    cases = [(rosenbrock.problem("penalty"), np.array(rosenbrock.DEFAULT_P)),
             (rosenbrock.problem("alm"), np.array(rosenbrock.DEFAULT_P)),
             (nmpc.BicycleNmpcProblem(horizon=10).build("penalty"),
              np.array([-5.0, 0.0, 0.0, 0.0, 0.0, 0.0])),
             (nmpc.BicycleNmpcProblem(horizon=10).build("alm"),
              np.array([-3.5, 0.1, 0.1, 1.0, 0.0, 0.0]))]
    m = mhe.LorenzMheProblem(horizon=5)
    cases.append((m.build(), rng.normal(size=2 * 6)))
    worst = 0.0
    for pb, p in cases:
        oracle = InnerOracle(pb, p, 37.0, rng.normal(size=pb.n1) if pb.n1 else None)
        u = 0.3 * rng.normal(size=pb.n)
        g = oracle.grad_psi(u)
        fd = fd_gradient(oracle.psi, u)
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd)))))
    return "bench gradients", worst <= 1e-5, f"relative error {worst:.1e}"


def check_equality_qp(rng):
    n, m = 4, 2
    M = rng.normal(size=(n, n))
    Q = M @ M.T + np.eye(n)
    q = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m)
    u_star, y_star = equality_qp_kkt(Q, q, A, b)
    pb = ProblemDefinition(
        n=n, n_p=0, cost=lambda u, p: 0.5 * u @ Q @ u + q @ u,
        grad_cost=lambda u, p: Q @ u + q, set_u=sets.WholeSpace(n),
        n1=m, f1=lambda u, p: A @ u - b, jf1_t_apply=lambda u, p, w: A.T @ w,
        set_c=sets.Zero(m))
    rep = AlmSolver(pb, SolverConfig(epsilon=1e-6, delta=1e-6)).solve(np.zeros(0))
    eu = float(np.max(np.abs(rep.solution - u_star)))
    ey = float(np.max(np.abs(rep.lagrange_multipliers - y_star)))
    ok = rep.converged and eu <= 1e-3 and ey <= 1e-2
    return "equality QP", ok, f"{rep.exit_status.value}, |du| {eu:.1e}, |dy| {ey:.1e}"


def check_rosenbrock(rng):
    from .bench import rosenbrock

    rep = AlmSolver(rosenbrock.problem("alm"), rosenbrock.config()).solve(rosenbrock.DEFAULT_P)
    ok = rep.converged and rep.num_outer_iterations <= 10
    return "rosenbrock", ok, (f"{rep.exit_status.value}, {rep.num_outer_iterations} outer, "
                              f"{rep.num_inner_iterations} inner")


CHECKS = (check_projections, check_lbfgs, check_kernels, check_gradients,
          check_equality_qp, check_rosenbrock)


def run_selftest(seed: int = 0):
    rng = np.random.default_rng(seed)
    results = []
    for check in CHECKS:
        try:
            results.append(check(rng))
        except Exception as e:  # noqa: BLE001, report and keep going
            results.append((check.__name__, False, f"raised {type(e).__name__}: {e}"))
    return results
