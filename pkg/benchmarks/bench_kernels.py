"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Part one times each hot kernel in-process through ``_backend.get``. Part two
runs short end-to-end solves in subprocesses, once per backend, selecting the
pure-Python path with ``PANOCALM_PURE_PYTHON=1``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from panocalm import _backend, _fallback

END_TO_END = {
    "rosenbrock-alm": (
        "from panocalm.bench import rosenbrock\n"
        "from panocalm import AlmSolver\n"
        "s = AlmSolver(rosenbrock.problem('alm'), rosenbrock.config())\n"
        "run = lambda: s.solve(np.array(rosenbrock.DEFAULT_P))\n"),
    "mhe-100 (1 trial)": (
        "from panocalm.bench import mhe\n"
        "run = lambda: mhe.run_mhe(100, trials=1, seed=0)\n"),
    "nmpc-alm (10 steps)": (
        "from panocalm.bench import nmpc\n"
        "run = lambda: nmpc.run_nmpc_closed_loop('alm', 10)\n"),
}

_CHILD = """
import time, numpy as np, panocalm
{setup}
run()
best = float('inf')
for _ in range({repeat}):
    t = time.perf_counter(); run(); best = min(best, time.perf_counter() - t)
print(panocalm.BACKEND, best)
"""


def kernel_cases(rng):
    N = 100
    u = rng.uniform(-0.25, 0.25, 2 * N)
    x0 = np.array([-5.0, 0.0, 0.0, 0.0])
    X = np.empty((N + 1, 4))
    _fallback.bicycle_rollout(u, x0, 0.05, 0.5, 0.25, X)
    qs, qn, rw = np.array([18.0, 18, 2, 5]), np.array([1500.0, 1500, 500, 10]), np.array([100.0, 30])
    m, n = 20, 200
    S, Y = rng.normal(size=(m, n)), rng.normal(size=(m, n))
    Y += 3.0 * S
    rho = 1.0 / np.einsum("ij,ij->i", S, Y)
    L = rng.normal(size=(100, 3)) * 5.0
    return {
        "lbfgs_two_loop": (S, Y, rho, np.zeros(m), 0, m, 1.0, rng.normal(size=n)),
        "bicycle_rollout": (u, x0, 0.05, 0.5, 0.25, np.empty((N + 1, 4))),
        "bicycle_vjp": (u, X, rng.normal(size=(N + 1, 4)), 0.05, 0.5, 0.25, np.empty(2 * N)),
        "lorenz_rk4": (L, 0.1, 10.0, 14.0, 8 / 3, np.empty((100, 3))),
        "lorenz_rk4_vjp": (L, rng.normal(size=(100, 3)), 0.1, 10.0, 14.0, 8 / 3,
                           np.empty((100, 3))),
        "bicycle_cost_grad": (u, x0, np.zeros(2), qs, qn, rw, 0.05, 0.5, 0.25,
                              np.empty((N + 1, 4)), np.empty(2 * N), True),
        "bicycle_obstacle_vjp": (u, X, rng.normal(size=N), -3.0, 0.2, 0.05, 0.5, 0.25,
                                 np.empty(2 * N)),
    }


def time_kernels(repeat):
    cases = kernel_cases(np.random.default_rng(0))
    rows = []
    for name in _backend.KERNEL_NAMES:
        args = cases[name]
        row = {"kernel": name}
        for backend in ("compiled", "python"):
            if backend == "compiled" and _backend.BACKEND != "compiled":
                row[backend] = None
                continue
            fn = _backend.get(name, backend)
            t = timeit.Timer(lambda: fn(*args))
            number, _ = t.autorange()
            row[backend] = min(t.repeat(repeat, number)) / number
        rows.append(row)
    return rows


def time_end_to_end(repeat):
    rows = []
    for name, setup in END_TO_END.items():
        row = {"case": name}
        for backend, env_value in (("compiled", "0"), ("python", "1")):
            env = dict(os.environ, PANOCALM_PURE_PYTHON=env_value)
            proc = subprocess.run([sys.executable, "-c", _CHILD.format(setup=setup, repeat=repeat)],
                                  capture_output=True, text=True, env=env, check=True)
            got, seconds = proc.stdout.split()
            row[backend] = float(seconds) if got == backend else None
        rows.append(row)
    return rows


def _fmt(t):
    if t is None:
        return "n/a"
    return f"{t * 1e6:10.1f} us" if t < 1e-2 else f"{t * 1e3:10.1f} ms"


def _speedup(row):
    if row["compiled"] is None or row["python"] is None:
        return "n/a"
    return f"{row['python'] / row['compiled']:.1f}x"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write the timings to this file")
    args = ap.parse_args(argv)

    print(f"backend at import: {_backend.BACKEND}\n")
    kernels = time_kernels(args.repeat)
    print(f"{'kernel':<22}{'compiled':>14}{'python':>14}{'speedup':>10}")
    for r in kernels:
        print(f"{r['kernel']:<22}{_fmt(r['compiled']):>14}{_fmt(r['python']):>14}"
              f"{_speedup(r):>10}")
    e2e = time_end_to_end(max(1, args.repeat // 2))
    print(f"\n{'end to end':<22}{'compiled':>14}{'python':>14}{'speedup':>10}")
    for r in e2e:
        print(f"{r['case']:<22}{_fmt(r['compiled']):>14}{_fmt(r['python']):>14}{_speedup(r):>10}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"kernels": kernels, "end_to_end": e2e}, fh, indent=1)


if __name__ == "__main__":
    main()
