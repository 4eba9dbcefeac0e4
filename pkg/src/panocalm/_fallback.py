"""Pure numpy implementations of the hot kernels.

Signatures mirror ``_kernels.pyx`` exactly; outputs are written into the
``out``/``q`` arrays passed by the caller.
"""
import math

import numpy as np


def lbfgs_two_loop(S, Y, rho, alpha, start, count, gamma_scale, q):
    """Overwrite ``q`` with ``H q`` for the L-BFGS inverse Hessian ``H``.

    ``S``/``Y`` are ``(m, n)`` ring buffers holding ``count`` pairs starting
    at row ``start`` (oldest first).
    """
    m = S.shape[0]
    for j in range(count - 1, -1, -1):
        i = (start + j) % m
        a = rho[i] * (S[i] @ q)
        alpha[j] = a
        q -= a * Y[i]
    q *= gamma_scale
    for j in range(count):
        i = (start + j) % m
        b = rho[i] * (Y[i] @ q)
        q += (alpha[j] - b) * S[i]


def bicycle_rollout(u, x0, ts, length, alpha, X):
    """Euler rollout of the kinematic bicycle; ``X`` has shape ``(N + 1, 4)``."""
    N = u.shape[0] // 2
    px, py, psi, v = float(x0[0]), float(x0[1]), float(x0[2]), float(x0[3])
    X[0, 0], X[0, 1], X[0, 2], X[0, 3] = px, py, psi, v
    for t in range(N):
        a = u[2 * t]
        d = u[2 * t + 1]
        px, py, psi, v = (
            px + ts * v * math.cos(psi),
            py + ts * v * math.sin(psi),
            psi + ts * v / length * math.tan(d),
            v + ts * alpha * (a - v),
        )
        X[t + 1, 0], X[t + 1, 1], X[t + 1, 2], X[t + 1, 3] = px, py, psi, v


def bicycle_vjp(u, X, G, ts, length, alpha, out):
    """Adjoint sweep: ``out = sum_t (dx_t/du)^T G[t]`` for the rollout ``X``."""
    N = u.shape[0] // 2
    l0, l1, l2, l3 = G[N, 0], G[N, 1], G[N, 2], G[N, 3]
    for t in range(N - 1, -1, -1):
        psi, v = X[t, 2], X[t, 3]
        d = u[2 * t + 1]
        c, s, td = math.cos(psi), math.sin(psi), math.tan(d)
        out[2 * t] = ts * alpha * l3
        out[2 * t + 1] = ts * v / (length * math.cos(d) ** 2) * l2
        n2 = l2 + ts * (-v * s * l0 + v * c * l1)
        n3 = l3 + ts * (c * l0 + s * l1 + td / length * l2 - alpha * l3)
        l0, l1, l2, l3 = G[t, 0] + l0, G[t, 1] + l1, G[t, 2] + n2, G[t, 3] + n3


def _lorenz_rhs(X, a1, a2, a3):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return np.stack((a1 * (x2 - x1), x1 * (a2 - x3) - x2, x1 * x2 - a3 * x3), axis=1)


def _lorenz_jt(X, B, a1, a2, a3):
    # J(x)^T b for J = [[-a1, a1, 0], [a2 - x3, -1, -x1], [x2, x1, -a3]]
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    b1, b2, b3 = B[:, 0], B[:, 1], B[:, 2]
    return np.stack((
        -a1 * b1 + (a2 - x3) * b2 + x2 * b3,
        a1 * b1 - b2 + x1 * b3,
        -x1 * b2 - a3 * b3,
    ), axis=1)


def lorenz_rk4(X, h, a1, a2, a3, out):
    """One RK4 step of the Lorenz system for every row of ``X``."""
    k1 = _lorenz_rhs(X, a1, a2, a3)
    k2 = _lorenz_rhs(X + 0.5 * h * k1, a1, a2, a3)
    k3 = _lorenz_rhs(X + 0.5 * h * k2, a1, a2, a3)
    k4 = _lorenz_rhs(X + h * k3, a1, a2, a3)
    out[:] = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lorenz_rk4_vjp(X, W, h, a1, a2, a3, out):
    """Row-wise ``J_Phi(X[t])^T W[t]`` for the RK4 map of :func:`lorenz_rk4`."""
    k1 = _lorenz_rhs(X, a1, a2, a3)
    z2 = X + 0.5 * h * k1
    k2 = _lorenz_rhs(z2, a1, a2, a3)
    z3 = X + 0.5 * h * k2
    k3 = _lorenz_rhs(z3, a1, a2, a3)
    z4 = X + h * k3
    g4 = _lorenz_jt(z4, (h / 6.0) * W, a1, a2, a3)
    g3 = _lorenz_jt(z3, (h / 3.0) * W + h * g4, a1, a2, a3)
    g2 = _lorenz_jt(z2, (h / 3.0) * W + 0.5 * h * g3, a1, a2, a3)
    g1 = _lorenz_jt(X, (h / 6.0) * W + 0.5 * h * g2, a1, a2, a3)
    out[:] = W + g1 + g2 + g3 + g4


def bicycle_cost_grad(u, x0, u_prev, qs, qn, rw, ts, length, alpha, X, g, want_grad):
    """Rollout into ``X`` and return the NMPC cost; fill ``g`` when ``want_grad``."""
    N = u.shape[0] // 2
    bicycle_rollout(u, x0, ts, length, alpha, X)
    inp = u.reshape(N, 2)
    diff = np.empty((N, 2))
    diff[0] = inp[0] - u_prev
    diff[1:] = inp[1:] - inp[:-1]
    total = float(np.sum((X[:-1] ** 2) @ qs) + (X[-1] ** 2) @ qn + np.sum((diff ** 2) @ rw))
    if not want_grad:
        return total
    G = np.empty_like(X)
    G[:-1] = 2.0 * qs * X[:-1]
    G[-1] = 2.0 * qn * X[-1]
    bicycle_vjp(u, X, G, ts, length, alpha, g)
    gr = 2.0 * rw * diff
    gr[:-1] -= 2.0 * rw * diff[1:]
    g += gr.reshape(-1)
    return total


def bicycle_obstacle_vjp(u, X, w, xc, yc, ts, length, alpha, out):
    """Adjoint of ``sum_t w[t-1] * h(x_t)`` with ``h = r^2 - |pos - centre|^2``."""
    G = np.zeros_like(X)
    G[1:, 0] = -2.0 * (X[1:, 0] - xc) * w
    G[1:, 1] = -2.0 * (X[1:, 1] - yc) * w
    bicycle_vjp(u, X, G, ts, length, alpha, out)
