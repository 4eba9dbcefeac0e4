"""Benchmark problems: constrained Rosenbrock, bicycle NMPC and Lorenz MHE."""
from typing import Callable, Dict, Tuple

from ..core import ProblemDefinition, SolverConfig


def _rosenbrock(encoding):
    def make():
        from . import rosenbrock
        return rosenbrock.problem(encoding), rosenbrock.config()
    return make


def _nmpc(encoding):
    def make():
        from . import nmpc
        return nmpc.BicycleNmpcProblem().build(encoding), nmpc.default_config()
    return make


def _mhe(horizon):
    def make():
        from . import mhe
        return mhe.LorenzMheProblem(horizon=horizon).build(), mhe.default_config()
    return make


PROBLEMS: Dict[str, Callable[[], Tuple[ProblemDefinition, SolverConfig]]] = {
    "rosenbrock-alm": _rosenbrock("alm"),
    "rosenbrock-penalty": _rosenbrock("penalty"),
    "nmpc-alm": _nmpc("alm"),
    "nmpc-penalty": _nmpc("penalty"),
    "mhe-50": _mhe(50),
    "mhe-100": _mhe(100),
    "mhe-150": _mhe(150),
}


def get_problem(name: str) -> Tuple[ProblemDefinition, SolverConfig]:
    """Problem definition and its tuned solver configuration by id."""
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
