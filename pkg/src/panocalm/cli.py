"""Command-line entry point: ``panocalm <subcommand> ...``.

Exit codes: 0 success, 1 solver failure, 2 invalid arguments.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import _backend


def _triple(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(vals) != 3 or not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"expected three finite numbers, got {text!r}")
    return tuple(vals)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (v > 0 and np.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text!r}")
    return v


def _port(text):
    v = _positive_int(text)
    if v > 65535:
        raise argparse.ArgumentTypeError("port must be <= 65535")
    return v


def _report_dict(rep):
    return {
        "exit_status": rep.exit_status.value,
        "outer_iterations": rep.num_outer_iterations,
        "inner_iterations": rep.num_inner_iterations,
        "penalty": rep.penalty,
        "delta_y_norm": rep.delta_y_norm,
        "f2_norm": rep.f2_norm,
        "fpr_norm": rep.last_fpr_norm,
        "cost": rep.cost,
        "solve_time_s": rep.solve_time,
    }


def _write_json(path, payload):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
        print(f"wrote {path}")


def _table(rows):
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"  {k:<{width}}  {v}")


def cmd_rosenbrock(args) -> int:
    from .alm import AlmSolver
    from .bench import rosenbrock

    pb = rosenbrock.problem(args.encoding)
    rep = AlmSolver(pb, rosenbrock.config()).solve(np.array(args.p))
    p = np.array(args.p)
    if args.encoding == "alm":
        w = rosenbrock.f1(rep.solution, p)
        feas = max(abs(w[0]), max(w[1], 0.0))
    else:
        feas = float(np.max(np.abs(rosenbrock.f2(rep.solution, p))))
    print(f"rosenbrock ({args.encoding}) at p = {args.p}")
    _table([("status", rep.exit_status.value), ("outer", rep.num_outer_iterations),
            ("inner", rep.num_inner_iterations), ("penalty", f"{rep.penalty:.4g}"),
            ("infeasibility", f"{feas:.3e}"), ("cost", f"{rep.cost:.8g}"),
            ("time [ms]", f"{1e3 * rep.solve_time:.2f}"),
            ("solution", np.array2string(rep.solution, precision=6))])
    _write_json(args.out, {"encoding": args.encoding, "p": list(args.p),
                           "report": _report_dict(rep), "infeasibility": feas,
                           "solution": rep.solution.tolist(),
                           "multipliers": rep.lagrange_multipliers.tolist()})
    return 0 if rep.converged else 1


def cmd_nmpc(args) -> int:
    from .bench import nmpc

    model = nmpc.BicycleNmpcProblem()
    res = nmpc.run_nmpc_closed_loop(args.encoding, args.steps, model)
    times = res.solve_times
    clearance = res.min_obstacle_clearance_sq(model)
    statuses = [r.exit_status.value for r in res.reports]
    print(f"nmpc ({args.encoding}), {args.steps} steps, backend {_backend.BACKEND}")
    _table([("converged steps", f"{statuses.count('Converged')}/{len(statuses)}"),
            ("median solve [ms]", f"{1e3 * np.median(times):.2f}"),
            ("max solve [ms]", f"{1e3 * np.max(times):.2f}"),
            ("min clearance^2", f"{clearance:.4f} (r^2 = {model.radius ** 2:.4f})"),
            ("final |(px,py,psi)|", f"{res.final_pose_error():.4g}")])
    _write_json(args.out, {
        "encoding": args.encoding, "steps": args.steps, "backend": _backend.BACKEND,
        "initial_state": list(nmpc.INITIAL_STATE),
        "min_clearance_sq": clearance, "final_pose_error": res.final_pose_error(),
        "states": res.states.tolist(), "inputs": res.inputs.tolist(),
        "reports": [_report_dict(r) for r in res.reports]})
    failed = sum(r.exit_status.value == "OracleFailure" for r in res.reports)
    return 1 if failed else 0


def cmd_mhe(args) -> int:
    from .bench import mhe

    run = mhe.run_mhe(args.horizon, args.trials, seed=args.seed)
    reps = run.reports
    outer = [r.num_outer_iterations for r in reps]
    inner = [r.num_inner_iterations for r in reps]
    pen = [r.penalty for r in reps]
    n_conv = sum(r.converged for r in reps)
    print(f"mhe, N = {args.horizon}, {args.trials} trials, backend {_backend.BACKEND}")
    _table([("converged", f"{n_conv}/{len(reps)}"), ("max outer", max(outer)),
            ("median inner", f"{np.median(inner):.0f}"), ("max penalty", f"{max(pen):.5g}"),
            ("median solve [ms]", f"{1e3 * np.median([r.solve_time for r in reps]):.2f}"),
            ("median rms state error", f"{np.median(run.rms_errors):.4f}")])
    _write_json(args.out, {
        "horizon": args.horizon, "seeds": run.seeds, "rms_errors": run.rms_errors,
        "penalty_trajectories": [[h[0] for h in r.history] for r in reps],
        "reports": [_report_dict(r) for r in reps]})
    return 0 if n_conv == len(reps) else 1


def cmd_serve(args) -> int:
    from .bench import get_problem
    from .server import ServerConfig, serve

    pb, cfg = get_problem(args.problem)
    if args.max_duration is not None:
        cfg = dataclasses.replace(cfg, max_duration=args.max_duration)
    print(f"serving {args.problem} on {args.ip}:{args.port}", flush=True)
    serve(pb, cfg, ServerConfig(bind_ip=args.ip, port=args.port))
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser() -> argparse.ArgumentParser:
    from .bench import PROBLEMS

    ap = argparse.ArgumentParser(prog="panocalm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rosenbrock", help="constrained Rosenbrock example")
    p.add_argument("--encoding", choices=("penalty", "alm"), default="alm")
    p.add_argument("--p", type=_triple, default=(1.0, 50.0, 1.5), metavar="P1,P2,P3")
    p.add_argument("--out", help="JSON result file")
    p.set_defaults(func=cmd_rosenbrock)

    p = sub.add_parser("nmpc", help="closed-loop obstacle-avoidance NMPC")
    p.add_argument("--encoding", choices=("penalty", "alm"), default="penalty")
    p.add_argument("--steps", type=_positive_int, default=300)
    p.add_argument("--out", help="JSON result file")
    p.set_defaults(func=cmd_nmpc)

    p = sub.add_parser("mhe", help="Lorenz moving-horizon estimation trials")
    p.add_argument("--horizon", type=int, choices=(50, 100, 150), default=100)
    p.add_argument("--trials", type=_positive_int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON result file")
    p.set_defaults(func=cmd_mhe)

    p = sub.add_parser("serve", help="TCP solver service")
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="rosenbrock-alm")
    p.add_argument("--ip", default="127.0.0.1")
    p.add_argument("--port", type=_port, default=8333)
    p.add_argument("--max-duration", type=_positive_float, metavar="SECONDS",
                   help="wall-clock budget per Run request")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("selftest", help="quick invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
