import math

import numpy as np
import pytest

from panocalm import (
    AlmSolver,
    DimensionMismatch,
    ExitStatus,
    ProblemDefinition,
    Rectangle,
    SolverConfig,
    WholeSpace,
    Zero,
    multiplier_update,
    penalty_decision,
    solve,
)
from panocalm.bench import rosenbrock
from panocalm.oracle import equality_qp_kkt

from conftest import assert_converged_invariant, quadratic_problem


def test_multiplier_update_examples():
    y = multiplier_update(np.zeros(2), 5.0, np.array([0.3, -1.0]), Rectangle(None, [1.0, 0.0]))
    assert np.array_equal(y, [0.0, 0.0])
    assert np.array_equal(multiplier_update([0.0], 10.0, [0.3], Zero(1)), [3.0])
    assert np.array_equal(multiplier_update([1.0], 2.0, [-3.0], Rectangle(None, [0.0])), [0.0])


def test_penalty_decision_examples():
    assert not penalty_decision(9.0, 9.0, 10.0, 10.0, 0.25, 0)
    assert not penalty_decision(1.0, None, 10.0, math.inf, 0.25, 3)
    assert penalty_decision(9.0, 9.0, 10.0, 10.0, 0.25, 1)


def test_penalty_decision_rules():
    # z improved enough, t did not
    assert not penalty_decision(1.0, 9.0, 10.0, 10.0, 0.25, 2, rule="both")
    assert penalty_decision(1.0, 9.0, 10.0, 10.0, 0.25, 2, rule="either")
    # single present measure that stalled raises the penalty under both rules
    assert penalty_decision(None, 9.0, math.inf, 10.0, 0.25, 2, rule="both")
    assert penalty_decision(9.0, None, 10.0, math.inf, 0.25, 2, rule="either")
    assert not penalty_decision(None, None, 0.0, 0.0, 0.25, 5)


def test_scalar_equality_kkt():
    pb = ProblemDefinition(n=1, n_p=0, cost=lambda u, p: 0.5 * float(u @ u),
                           grad_cost=lambda u, p: u.copy(), set_u=WholeSpace(1), n1=1,
                           f1=lambda u, p: u - 1.0, jf1_t_apply=lambda u, p, w: w.copy(),
                           set_c=Zero(1))
    cfg = SolverConfig(epsilon=1e-7, delta=1e-7)
    rep = solve(pb, cfg)
    assert rep.converged
    assert abs(rep.solution[0] - 1.0) <= 1e-6 and abs(rep.lagrange_multipliers[0] + 1.0) <= 1e-5
    assert rep.delta_y_norm <= rep.penalty * cfg.delta
    assert_converged_invariant(rep, cfg)


@pytest.fixture(scope="module")
def rosenbrock_reports():
    cfg = rosenbrock.config()
    p = np.array(rosenbrock.DEFAULT_P)
    return cfg, {enc: AlmSolver(rosenbrock.problem(enc), cfg).solve(p)
                 for enc in ("penalty", "alm")}


def test_rosenbrock_penalty(rosenbrock_reports):
    cfg, reps = rosenbrock_reports
    rep = reps["penalty"]
    assert rep.converged
    assert np.max(np.abs(rosenbrock.f2(rep.solution, np.array(rosenbrock.DEFAULT_P)))) <= 1e-4
    assert_converged_invariant(rep, cfg)


def test_rosenbrock_alm(rosenbrock_reports):
    cfg, reps = rosenbrock_reports
    rep = reps["alm"]
    assert rep.converged
    assert_converged_invariant(rep, cfg)
    assert np.max(np.abs(reps["penalty"].solution - rep.solution)) <= 1e-3


def _random_eq_qp(rng):
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, min(n, 3) + 1))
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.5 * np.eye(n)
    q = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m)
    return Q, q, A, b


def test_equality_qp_approximate_kkt(rng):
    cfg = SolverConfig(epsilon=1e-6, delta=1e-6)
    for _ in range(25):
        Q, q, A, b = _random_eq_qp(rng)
        rep = AlmSolver(quadratic_problem(Q, q, A=A, b=b), cfg).solve(np.zeros(0))
        assert rep.converged
        u, y, c = rep.solution, rep.lagrange_multipliers, rep.penalty
        norm_a = np.max(np.sum(np.abs(A), axis=1))
        assert np.max(np.abs(Q @ u + q + A.T @ y)) <= cfg.epsilon + c * cfg.delta * norm_a
        assert np.max(np.abs(A @ u - b)) <= cfg.delta * (1 + np.max(np.abs(y)) / c)
        u_star, y_star = equality_qp_kkt(Q, q, A, b)
        assert np.max(np.abs(u - u_star)) <= 1e-3


def test_outer_loop_invariants(rng):
    Q, q, A, b = _random_eq_qp(rng)
    cfg = SolverConfig(epsilon=1e-7, delta=1e-7, c0=1.0, rho=3.0)
    solver = AlmSolver(quadratic_problem(Q, q, A=A, b=b), cfg)
    calls = []
    solver.on_inner_solve = lambda nu, u0, yb, c, res: calls.append((nu, u0, yb, c, res.u))
    rep = solver.solve(np.zeros(0))
    assert rep.converged
    cs = [h[0] for h in rep.history]
    assert cs[0] == cfg.c0
    for a, c in zip(cs, cs[1:]):
        assert c == a or math.isclose(c, a * cfg.rho, rel_tol=1e-15)
    # tolerance homotopy
    eps = [h[1] for h in rep.history]
    for k, e in enumerate(eps):
        assert math.isclose(e, max(cfg.epsilon, cfg.epsilon0 * cfg.beta ** k), rel_tol=1e-12)
    assert rep.eps_bar <= cfg.epsilon
    # warm start: each inner solve starts from the previous inner solution
    for prev, nxt in zip(calls, calls[1:]):
        assert np.array_equal(nxt[1], prev[4])
    assert np.array_equal(calls[0][1], np.zeros(Q.shape[0]))
    # the penalty seen by PANOC matches the history
    assert [c[3] for c in calls] == cs


def test_multipliers_projected_onto_y():
    # C = (-inf, 0]: default Y = [0, M], so y_bar >= 0 before every inner solve
    pb = ProblemDefinition(n=2, n_p=0, cost=lambda u, p: float((u - 2.0) @ (u - 2.0)),
                           grad_cost=lambda u, p: 2.0 * (u - 2.0), set_u=WholeSpace(2), n1=1,
                           f1=lambda u, p: np.array([u[0] + u[1] - 1.0]),
                           jf1_t_apply=lambda u, p, w: np.array([w[0], w[0]]),
                           set_c=Rectangle(None, [0.0]))
    solver = AlmSolver(pb, SolverConfig(epsilon=1e-6, delta=1e-6))
    seen = []
    solver.on_inner_solve = lambda nu, u0, yb, c, res: seen.append(yb.copy())
    rep = solver.solve(np.zeros(0), y0=np.array([-5.0]))
    assert rep.converged
    assert seen[0][0] == 0.0
    assert all(0.0 <= yb[0] <= 1e12 for yb in seen)
    assert np.allclose(rep.solution, [0.5, 0.5], atol=1e-5)
    assert math.isclose(rep.lagrange_multipliers[0], 3.0, rel_tol=1e-4)


def test_custom_y_set_respected():
    pb = quadratic_problem(np.eye(2), np.zeros(2), A=np.array([[1.0, 1.0]]), b=np.array([2.0]))
    pb = ProblemDefinition(**{**pb.__dict__, "set_y": Rectangle([-0.25], [0.25])})
    solver = AlmSolver(pb, SolverConfig(epsilon=1e-6, delta=1e-6))
    seen = []
    solver.on_inner_solve = lambda nu, u0, yb, c, res: seen.append(float(yb[0]))
    solver.solve(np.zeros(0))
    assert all(-0.25 <= v <= 0.25 for v in seen)


def test_pure_penalty_has_zero_z():
    rep = AlmSolver(rosenbrock.problem("penalty"), rosenbrock.config()).solve(
        rosenbrock.DEFAULT_P)
    assert rep.delta_y_norm == 0.0 and rep.lagrange_multipliers.shape == (0,)


def test_converged_reports_reevaluate(rosenbrock_reports):
    cfg, reps = rosenbrock_reports
    p = np.array(rosenbrock.DEFAULT_P)
    u = reps["penalty"].solution
    assert np.max(np.abs(rosenbrock.f2(u, p))) <= cfg.delta
    u = reps["alm"].solution
    w = rosenbrock.f1(u, p)
    assert abs(w[0]) <= cfg.delta and w[1] <= cfg.delta


def test_infeasible_problem_hits_outer_limit():
    pb = ProblemDefinition(n=1, n_p=0, cost=lambda u, p: float(u @ u),
                           grad_cost=lambda u, p: 2.0 * u, set_u=WholeSpace(1), n2=1,
                           f2=lambda u, p: np.array([1.0]), grad_f2_sq=lambda u, p: np.zeros(1))
    rep = solve(pb, SolverConfig(max_outer_iters=6))
    assert rep.exit_status is ExitStatus.MAX_OUTER_ITERATIONS
    assert rep.num_outer_iterations == 6
    assert rep.penalty == 10.0 * 5.0 ** 5


def test_time_budget():
    pb = rosenbrock.problem("alm")
    rep = AlmSolver(pb, rosenbrock.config(max_duration=1e-9)).solve(rosenbrock.DEFAULT_P)
    assert rep.exit_status is ExitStatus.TIME_BUDGET_EXCEEDED


def test_oracle_failure_status():
    def cost(u, p):
        return float(u @ u) if np.all(np.abs(u) < 0.5) else math.nan

    pb = ProblemDefinition(n=1, n_p=0, cost=cost, grad_cost=lambda u, p: 2.0 * u - 10.0,
                           set_u=WholeSpace(1))
    rep = solve(pb, SolverConfig())
    assert rep.exit_status is ExitStatus.ORACLE_FAILURE


def test_dimension_checks():
    solver = AlmSolver(rosenbrock.problem("alm"), rosenbrock.config())
    with pytest.raises(DimensionMismatch):
        solver.solve([1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        solver.solve(rosenbrock.DEFAULT_P, u0=np.zeros(4))
    with pytest.raises(DimensionMismatch):
        solver.solve(rosenbrock.DEFAULT_P, y0=np.zeros(3))


def test_either_rule_grows_penalty_sooner():
    # one ALM row and one penalty row
    pb = ProblemDefinition(n=2, n_p=0, cost=lambda u, p: float((u - 2.0) @ (u - 2.0)),
                           grad_cost=lambda u, p: 2.0 * (u - 2.0), set_u=WholeSpace(2),
                           n1=1, f1=lambda u, p: u[:1] - 1.0,
                           jf1_t_apply=lambda u, p, w: np.array([w[0], 0.0]), set_c=Zero(1),
                           n2=1, f2=lambda u, p: u[1:] - 1.0,
                           grad_f2_sq=lambda u, p: np.array([0.0, 2.0 * (u[1] - 1.0)]))
    reps = {rule: solve(pb, SolverConfig(epsilon=1e-6, delta=1e-5, penalty_rule=rule))
            for rule in ("both", "either")}
    either = reps["either"]
    assert either.converged
    assert np.allclose(either.solution, [1.0, 1.0], atol=1e-4)
    # with "both", the shrinking multiplier residual keeps holding the penalty
    # while the penalty residual stagnates
    c_both = [h[0] for h in reps["both"].history[:5]]
    c_either = [h[0] for h in either.history[:5]]
    assert c_both == [10.0] * 5
    assert c_either[-1] > c_both[-1]


def test_solver_reuse_is_deterministic():
    solver = AlmSolver(rosenbrock.problem("alm"), rosenbrock.config())
    a = solver.solve(rosenbrock.DEFAULT_P)
    b = solver.solve(rosenbrock.DEFAULT_P)
    assert np.array_equal(a.solution, b.solution)
    assert solver.last_report is b
