"""Limited-memory BFGS with the cautious (Li-Fukushima) pair acceptance rule."""
import numpy as np

from . import _backend


class LbfgsBuffer:
    """Ring buffer of curvature pairs ``(s, y)`` and the two-loop recursion.

    Parameters
    ----------
    n : int
        Problem dimension.
    memory : int
        Maximum number of stored pairs.
    cbfgs_epsilon : float
        A pair is stored only if ``<s, y> / ||s||^2 >= cbfgs_epsilon * grad_norm``.
    """

    def __init__(self, n: int, memory: int, cbfgs_epsilon: float = 1e-10):
        if memory < 1:
            raise ValueError("memory must be >= 1")
        self.n = n
        self.memory = memory
        self.cbfgs_epsilon = cbfgs_epsilon
        self.s_history = np.zeros((memory, n))
        self.y_history = np.zeros((memory, n))
        self.rho_history = np.zeros(memory)
        self._alpha = np.zeros(memory)
        self.start = 0
        self.count = 0
        self.gamma_scale = 1.0

    def clear(self) -> None:
        self.start = 0
        self.count = 0
        self.gamma_scale = 1.0

    def update(self, s, y_res, grad_norm: float) -> bool:
        """Offer the pair ``(s, y_res)``; returns whether it was stored."""
        sy = float(s @ y_res)
        ss = float(s @ s)
        if not (sy > 0.0 and ss > 0.0) or not np.isfinite(sy):
            return False
        if sy / ss < self.cbfgs_epsilon * grad_norm:
            return False
        if self.count < self.memory:
            slot = (self.start + self.count) % self.memory
            self.count += 1
        else:
            slot = self.start
            self.start = (self.start + 1) % self.memory
        self.s_history[slot] = s
        self.y_history[slot] = y_res
        self.rho_history[slot] = 1.0 / sy
        self.gamma_scale = sy / float(y_res @ y_res)
        return True

    def apply(self, r, out=None) -> np.ndarray:
        """Return ``d = -H r``; with an empty buffer ``H`` is the identity."""
        if out is None:
            out = np.empty(self.n)
        out[:] = r
        if self.count:
            _backend.lbfgs_two_loop(self.s_history, self.y_history, self.rho_history,
                                    self._alpha, self.start, self.count,
                                    self.gamma_scale, out)
        np.negative(out, out=out)
        return out

    def __len__(self):
        return self.count
