"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when ``PANOCALM_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the numpy implementations in ``_fallback`` are used.
"""
import os

from . import _fallback

KERNEL_NAMES = (
    "lbfgs_two_loop",
    "bicycle_rollout",
    "bicycle_vjp",
    "lorenz_rk4",
    "lorenz_rk4_vjp",
    "bicycle_cost_grad",
    "bicycle_obstacle_vjp",
)


def _load():
    if os.environ.get("PANOCALM_PURE_PYTHON", "") not in ("", "0"):
        return _fallback, "python"
    try:
        from . import _kernels
    except ImportError:
        return _fallback, "python"
    return _kernels, "compiled"


kernels, BACKEND = _load()

lbfgs_two_loop = kernels.lbfgs_two_loop
bicycle_rollout = kernels.bicycle_rollout
bicycle_vjp = kernels.bicycle_vjp
lorenz_rk4 = kernels.lorenz_rk4
lorenz_rk4_vjp = kernels.lorenz_rk4_vjp
bicycle_cost_grad = kernels.bicycle_cost_grad
bicycle_obstacle_vjp = kernels.bicycle_obstacle_vjp


def get(name: str, backend: str = BACKEND):
    """Return kernel ``name`` from a specific backend (``"compiled"`` or ``"python"``)."""
    if backend == "python":
        return getattr(_fallback, name)
    from . import _kernels

    return getattr(_kernels, name)
