import math

import numpy as np
import pytest

from panocalm import AlmSolver, ExitStatus
from panocalm.bench import PROBLEMS, get_problem, mhe, nmpc, rosenbrock
from panocalm.oracle import fd_gradient


# ---------------------------------------------------------------- Rosenbrock

def test_rosenbrock_cost_formula(rng):
    for _ in range(50):
        u = rng.normal(size=5)
        p = rng.uniform(0.5, 60.0, 3)
        ref = sum(p[1] * (u[i + 1] - u[i] ** 2) ** 2 + (p[0] - u[i]) ** 2 for i in range(4))
        assert rosenbrock.cost(u, p) == pytest.approx(ref, rel=1e-14)


def test_rosenbrock_encodings():
    u = np.array([0.1, 0.2, 0.15, 0.1, 0.0])
    p = np.array(rosenbrock.DEFAULT_P)
    raw = rosenbrock.constraints(u, p)
    assert raw[0] == pytest.approx(1.5 * math.sin(0.1) - math.cos(0.35))
    assert raw[1] == pytest.approx(0.05)
    assert np.allclose(rosenbrock.f2(u, p), raw)
    u[3] = -0.5
    assert rosenbrock.f2(u, p)[1] == 0.0 and rosenbrock.f1(u, p)[1] < 0
    with pytest.raises(ValueError):
        rosenbrock.problem("barrier")


def test_rosenbrock_both_encodings_agree():
    p = np.array(rosenbrock.DEFAULT_P)
    sols = {}
    for enc in ("alm", "penalty"):
        rep = AlmSolver(rosenbrock.problem(enc), rosenbrock.config()).solve(p)
        assert rep.converged, enc
        assert np.linalg.norm(rep.solution) <= rosenbrock.RADIUS + 1e-12
        sols[enc] = rep.solution
    assert np.max(np.abs(sols["alm"] - sols["penalty"])) <= 1e-3
    assert np.max(np.abs(rosenbrock.f2(sols["penalty"], p))) <= 1e-4


def test_problem_registry():
    for name in PROBLEMS:
        pb, cfg = get_problem(name)
        assert pb.n > 0 and cfg.max_outer_iters > 0
    with pytest.raises(KeyError):
        get_problem("nope")


# ---------------------------------------------------------------- single shooting

def test_single_shooting_scalar_example():
    g = nmpc.single_shooting_gradient(
        [[0.0]], [1.0],
        step=lambda x, u: x + u,
        step_jac=lambda x, u: (np.eye(1), np.eye(1)),
        stage_grad=lambda x, u: (np.zeros(1), u),
        terminal_grad=lambda x: x)
    assert np.array_equal(g, [1.0])


def _bicycle_oracle(model):
    ts, L, al = model.ts, model.length, model.alpha
    qs, qn = np.array(model.stage_weights), np.array(model.terminal_weights)

    def step(x, u):
        px, py, psi, v = x
        return np.array([px + ts * v * math.cos(psi), py + ts * v * math.sin(psi),
                         psi + ts * v / L * math.tan(u[1]), v + ts * al * (u[0] - v)])

    def jac(x, u):
        _, _, psi, v = x
        A = np.eye(4)
        A[0, 2], A[0, 3] = -ts * v * math.sin(psi), ts * math.cos(psi)
        A[1, 2], A[1, 3] = ts * v * math.cos(psi), ts * math.sin(psi)
        A[2, 3] = ts * math.tan(u[1]) / L
        A[3, 3] = 1.0 - ts * al
        B = np.zeros((4, 2))
        B[3, 0] = ts * al
        B[2, 1] = ts * v / (L * math.cos(u[1]) ** 2)
        return A, B

    return dict(step=step, step_jac=jac, stage_grad=lambda x, u: (2 * qs * x, np.zeros(2)),
                terminal_grad=lambda x: 2 * qn * x, rate_weights=model.rate_weights)


@pytest.mark.property
def test_bicycle_gradient_matches_dense_adjoint(rng):
    model = nmpc.BicycleNmpcProblem(horizon=15)
    for _ in range(5):
        u = rng.uniform(-0.25, 0.25, model.n)
        x0 = np.array([-4.0, 0.5, 0.2, 1.0]) + 0.1 * rng.normal(size=4)
        up = rng.uniform(-0.2, 0.2, 2)
        _, g = model.cost_gradient(u, x0, up)
        ref = nmpc.single_shooting_gradient(u.reshape(-1, 2), x0, u_prev=up,
                                            **_bicycle_oracle(model))
        assert np.allclose(g, ref, rtol=1e-10, atol=1e-10)
        fd = fd_gradient(lambda w: model.cost_gradient(w, x0, up)[0], u)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


def test_rate_only_constant_sequence_zero_gradient():
    model = nmpc.BicycleNmpcProblem(horizon=12, stage_weights=(0.0,) * 4,
                                    terminal_weights=(0.0,) * 4)
    u = np.tile([0.3, -0.1], 12)
    cost, g = model.cost_gradient(u, [1.0, 2.0, 0.3, 0.5], u_prev=(0.3, -0.1))
    assert cost == 0.0 and np.array_equal(g, np.zeros(24))


def test_rollout_is_euler_recursion(rng):
    model = nmpc.BicycleNmpcProblem(horizon=8)
    u = rng.uniform(-0.2, 0.2, model.n)
    x0 = np.array([-5.0, 0.0, 0.1, 0.3])
    X = model.rollout(u, x0)
    step = _bicycle_oracle(model)["step"]
    x = x0
    assert X.shape == (9, 4) and np.array_equal(X[0], x0)
    for t in range(8):
        x = step(x, u[2 * t:2 * t + 2])
        assert np.allclose(X[t + 1], x, atol=1e-14)


@pytest.mark.property
def test_obstacle_encoding_consistency(rng):
    model = nmpc.BicycleNmpcProblem(horizon=20)
    pen, alm = model.build("penalty"), model.build("alm")
    assert pen.n == alm.n == 40
    for _ in range(100):
        u = rng.uniform(-1.0, 2.0, model.n) * np.tile([1.0, 0.25], 20)
        p = np.concatenate([rng.uniform([-4, -1, -1, 0], [-2, 1, 1, 2]), np.zeros(2)])
        h = alm.f1(u, p)
        f = pen.f2(u, p)
        assert np.array_equal(f == 0.0, h <= 0.0)
        assert np.array_equal(f, np.maximum(h, 0.0))


def test_closed_loop_short_run():
    model = nmpc.BicycleNmpcProblem()
    for enc, k in (("penalty", 4), ("alm", 10)):
        res = nmpc.run_nmpc_closed_loop(enc, k, model)
        assert res.states.shape == (k + 1, 4) and res.inputs.shape == (k, 2)
        assert all(r.exit_status is not ExitStatus.ORACLE_FAILURE for r in res.reports)
        assert np.all(res.inputs[:, 0] >= -1.0) and np.all(res.inputs[:, 0] <= 2.0)
        assert np.all(np.abs(res.inputs[:, 1]) <= 0.25)
        # the vehicle starts moving towards the target
        assert res.states[-1, 0] > res.states[0, 0]
    with pytest.raises(ValueError):
        nmpc.run_nmpc_closed_loop("penalty", 0)


def test_zero_obstacle_terminal_cost_monotone():
    model = nmpc.BicycleNmpcProblem(radius=0.0)
    res = nmpc.run_nmpc_closed_loop("penalty", 250, model)
    qn = np.array(model.terminal_weights)
    # terminal cost of the predicted final state x_N at each sampling instant
    VN = np.array([(model.rollout(r.solution, x)[-1] ** 2) @ qn
                   for r, x in zip(res.reports, res.states)])
    tail = VN[50:]
    assert np.all(np.diff(tail) <= 1e-9 * (1.0 + tail[:-1]))
    assert VN[-1] < 1e-6 * VN[0]
    J = np.array([r.cost for r in res.reports])
    assert np.all(np.diff(J) <= 1e-9 * (1.0 + J[:-1]))


# ---------------------------------------------------------------- MHE

def test_mhe_dimensions_and_cost():
    model = mhe.LorenzMheProblem(horizon=7)
    pb = model.build()
    assert pb.n == 64 and pb.n1 == 3 * 7 + 2 * 8
    u = np.arange(pb.n, dtype=float) / 10.0
    _, W, V = model.split(u)
    assert pb.cost(u, None) == pytest.approx(np.sum(W[:7] ** 2) + np.sum(V[:7] ** 2))


@pytest.mark.property
def test_mhe_residual_jacobian(rng):
    model = mhe.LorenzMheProblem(horizon=6)
    pb = model.build()
    p = rng.normal(size=pb.n_p)
    for _ in range(5):
        u = rng.normal(size=pb.n)
        w = rng.normal(size=pb.n1)
        g = pb.jf1_t_apply(u, p, w)
        fd = fd_gradient(lambda z: float(w @ pb.f1(z, p)), u)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


def test_mhe_simulation_respects_bounds():
    model = mhe.LorenzMheProblem(horizon=20)
    X, Y, W, V = model.simulate(np.random.default_rng(3))
    assert np.all(np.abs(W) <= 1.0) and np.all(np.abs(V) <= 1.5)
    assert np.allclose(Y, model.output(X) + V)
    assert np.allclose(X[1:], model.step(X[:-1]) + W[:-1])


def test_mhe_noiseless_recovers_zero_noise():
    cfg = mhe.default_config(epsilon=1e-8)
    run = mhe.run_mhe(40, trials=2, seed=11, config=cfg, noise=False)
    model = mhe.LorenzMheProblem(horizon=40)
    pb = model.build()
    for rep, s in zip(run.reports, run.seeds):
        assert rep.converged
        _, Y, _, _ = model.simulate(np.random.default_rng(s), noise=False)
        _, W, V = model.split(rep.solution)
        res = pb.f1(rep.solution, Y.reshape(-1))
        assert np.max(np.abs(res)) <= cfg.delta
        assert np.max(np.abs(W[:-1])) <= cfg.delta and np.max(np.abs(V[:-1])) <= cfg.delta


def test_mhe_dynamics_residual_bound_and_seeds():
    cfg = mhe.default_config()
    run = mhe.run_mhe(50, trials=3, seed=5, config=cfg)
    assert run.seeds == [5, 6, 7]
    model = mhe.LorenzMheProblem(horizon=50)
    pb = model.build()
    for rep, s in zip(run.reports, run.seeds):
        assert rep.converged
        _, Y, _, _ = model.simulate(np.random.default_rng(s))
        res = pb.f1(rep.solution, Y.reshape(-1))
        ymax = np.max(np.abs(rep.lagrange_multipliers))
        assert np.max(np.abs(res)) <= cfg.delta * (1.0 + ymax / rep.penalty)


def test_mhe_inner_iterations_grow_with_horizon():
    med = [np.median([r.num_inner_iterations for r in mhe.run_mhe(N, trials=6).reports])
           for N in (50, 150)]
    assert med[0] <= med[1]
