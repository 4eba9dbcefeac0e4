import os
import subprocess
import sys

import numpy as np
import pytest

from panocalm import _backend, _fallback

compiled = pytest.mark.skipif(_backend.BACKEND != "compiled",
                              reason="compiled extension not built")


def _kernel_cases(rng):
    N = 12
    u = rng.uniform(-0.25, 0.25, 2 * N)
    x0 = np.array([-4.0, 0.3, 0.1, 0.8])
    X = np.empty((N + 1, 4))
    _fallback.bicycle_rollout(u, x0, 0.05, 0.5, 0.25, X)
    m, n = 4, 6
    S, Y = rng.normal(size=(m, n)), rng.normal(size=(m, n))
    Y += 3.0 * S
    rho = 1.0 / np.einsum("ij,ij->i", S, Y)
    L = rng.normal(size=(7, 3))
    qs, qn, rw = np.array([18.0, 18, 2, 5]), np.array([1500.0, 1500, 500, 10]), np.array([100.0, 30])
    return {
        "lbfgs_two_loop": lambda: ((S, Y, rho, np.zeros(m), 2, 3, 0.7, rng.normal(size=n)), 7),
        "bicycle_rollout": lambda: ((u, x0, 0.05, 0.5, 0.25, np.empty((N + 1, 4))), 5),
        "bicycle_vjp": lambda: ((u, X, rng.normal(size=(N + 1, 4)), 0.05, 0.5, 0.25,
                                 np.empty(2 * N)), 6),
        "lorenz_rk4": lambda: ((L, 0.1, 10.0, 14.0, 8 / 3, np.empty((7, 3))), 5),
        "lorenz_rk4_vjp": lambda: ((L, rng.normal(size=(7, 3)), 0.1, 10.0, 14.0, 8 / 3,
                                    np.empty((7, 3))), 6),
        "bicycle_cost_grad": lambda: ((u, x0, np.array([0.1, -0.1]), qs, qn, rw, 0.05, 0.5,
                                       0.25, np.empty((N + 1, 4)), np.empty(2 * N), True),
                                      (9, 10)),
        "bicycle_obstacle_vjp": lambda: ((u, X, rng.normal(size=N), -3.0, 0.2, 0.05, 0.5, 0.25,
                                          np.empty(2 * N)), 8),
    }


def test_every_kernel_has_a_case():
    assert set(_kernel_cases(np.random.default_rng(0))) == set(_backend.KERNEL_NAMES)


@compiled
@pytest.mark.parametrize("name", _backend.KERNEL_NAMES)
def test_compiled_matches_fallback(name):
    make = _kernel_cases(np.random.default_rng(42))[name]
    args, outs = make()
    outs = outs if isinstance(outs, tuple) else (outs,)
    results = []
    for backend in ("compiled", "python"):
        a = [x.copy() if isinstance(x, np.ndarray) else x for x in args]
        ret = _backend.get(name, backend)(*a)
        results.append((ret, [a[i] for i in outs]))
    (r0, o0), (r1, o1) = results
    if r0 is not None or r1 is not None:
        assert r0 == pytest.approx(r1, rel=1e-12)
    for x, y in zip(o0, o1):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_pure_python_override():
    code = ("import numpy as np, panocalm\n"
            "from panocalm.bench import rosenbrock\n"
            "r = panocalm.solve(rosenbrock.problem('alm'), rosenbrock.config(),"
            " np.array(rosenbrock.DEFAULT_P))\n"
            "print(panocalm.BACKEND, r.exit_status.value)\n")
    env = dict(os.environ, PANOCALM_PURE_PYTHON="1")
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.split() == ["python", "Converged"]


def test_backend_exports():
    for name in _backend.KERNEL_NAMES:
        assert callable(getattr(_backend, name))
    assert _backend.BACKEND in ("compiled", "python")
