# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same signatures and semantics as ``_fallback``."""
from libc.math cimport cos, sin, tan


def lbfgs_two_loop(double[:, ::1] S, double[:, ::1] Y, double[::1] rho,
                   double[::1] alpha, Py_ssize_t start, Py_ssize_t count,
                   double gamma_scale, double[::1] q):
    cdef Py_ssize_t m = S.shape[0], n = S.shape[1]
    cdef Py_ssize_t j, i, k
    cdef double a, b
    for j in range(count - 1, -1, -1):
        i = (start + j) % m
        a = 0.0
        for k in range(n):
            a += S[i, k] * q[k]
        a *= rho[i]
        alpha[j] = a
        for k in range(n):
            q[k] -= a * Y[i, k]
    for k in range(n):
        q[k] *= gamma_scale
    for j in range(count):
        i = (start + j) % m
        b = 0.0
        for k in range(n):
            b += Y[i, k] * q[k]
        b = alpha[j] - rho[i] * b
        for k in range(n):
            q[k] += b * S[i, k]


def bicycle_rollout(double[::1] u, double[::1] x0, double ts, double length,
                    double alpha, double[:, ::1] X):
    cdef Py_ssize_t N = u.shape[0] // 2, t
    cdef double px = x0[0], py = x0[1], psi = x0[2], v = x0[3]
    cdef double a, d, npx, npy, npsi
    X[0, 0] = px; X[0, 1] = py; X[0, 2] = psi; X[0, 3] = v
    for t in range(N):
        a = u[2 * t]
        d = u[2 * t + 1]
        npx = px + ts * v * cos(psi)
        npy = py + ts * v * sin(psi)
        npsi = psi + ts * v / length * tan(d)
        v = v + ts * alpha * (a - v)
        px = npx; py = npy; psi = npsi
        X[t + 1, 0] = px; X[t + 1, 1] = py; X[t + 1, 2] = psi; X[t + 1, 3] = v


def bicycle_vjp(double[::1] u, double[:, ::1] X, double[:, ::1] G, double ts,
                double length, double alpha, double[::1] out):
    cdef Py_ssize_t N = u.shape[0] // 2, t
    cdef double l0 = G[N, 0], l1 = G[N, 1], l2 = G[N, 2], l3 = G[N, 3]
    cdef double psi, v, d, c, s, td, cd, n2, n3
    for t in range(N - 1, -1, -1):
        psi = X[t, 2]
        v = X[t, 3]
        d = u[2 * t + 1]
        c = cos(psi)
        s = sin(psi)
        td = tan(d)
        cd = cos(d)
        out[2 * t] = ts * alpha * l3
        out[2 * t + 1] = ts * v / (length * cd * cd) * l2
        n2 = l2 + ts * (-v * s * l0 + v * c * l1)
        n3 = l3 + ts * (c * l0 + s * l1 + td / length * l2 - alpha * l3)
        l0 = G[t, 0] + l0
        l1 = G[t, 1] + l1
        l2 = G[t, 2] + n2
        l3 = G[t, 3] + n3


cdef inline void _rhs(double x1, double x2, double x3, double a1, double a2,
                      double a3, double* k) nogil:
    k[0] = a1 * (x2 - x1)
    k[1] = x1 * (a2 - x3) - x2
    k[2] = x1 * x2 - a3 * x3


cdef inline void _jt(double x1, double x2, double x3, double b1, double b2,
                     double b3, double a1, double a2, double a3, double* g) nogil:
    g[0] = -a1 * b1 + (a2 - x3) * b2 + x2 * b3
    g[1] = a1 * b1 - b2 + x1 * b3
    g[2] = -x1 * b2 - a3 * b3


def lorenz_rk4(double[:, ::1] X, double h, double a1, double a2, double a3,
               double[:, ::1] out):
    cdef Py_ssize_t m = X.shape[0], t, i
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double x[3]
    for t in range(m):
        for i in range(3):
            x[i] = X[t, i]
        _rhs(x[0], x[1], x[2], a1, a2, a3, k1)
        _rhs(x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1], x[2] + 0.5 * h * k1[2],
             a1, a2, a3, k2)
        _rhs(x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1], x[2] + 0.5 * h * k2[2],
             a1, a2, a3, k3)
        _rhs(x[0] + h * k3[0], x[1] + h * k3[1], x[2] + h * k3[2], a1, a2, a3, k4)
        for i in range(3):
            out[t, i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def lorenz_rk4_vjp(double[:, ::1] X, double[:, ::1] W, double h, double a1,
                   double a2, double a3, double[:, ::1] out):
    cdef Py_ssize_t m = X.shape[0], t, i
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double z2[3]
    cdef double z3[3]
    cdef double z4[3]
    cdef double g1[3]
    cdef double g2[3]
    cdef double g3[3]
    cdef double g4[3]
    cdef double x[3]
    cdef double w[3]
    for t in range(m):
        for i in range(3):
            x[i] = X[t, i]
            w[i] = W[t, i]
        _rhs(x[0], x[1], x[2], a1, a2, a3, k1)
        for i in range(3):
            z2[i] = x[i] + 0.5 * h * k1[i]
        _rhs(z2[0], z2[1], z2[2], a1, a2, a3, k2)
        for i in range(3):
            z3[i] = x[i] + 0.5 * h * k2[i]
        _rhs(z3[0], z3[1], z3[2], a1, a2, a3, k3)
        for i in range(3):
            z4[i] = x[i] + h * k3[i]
        _jt(z4[0], z4[1], z4[2], h / 6.0 * w[0], h / 6.0 * w[1], h / 6.0 * w[2],
            a1, a2, a3, g4)
        _jt(z3[0], z3[1], z3[2], h / 3.0 * w[0] + h * g4[0], h / 3.0 * w[1] + h * g4[1],
            h / 3.0 * w[2] + h * g4[2], a1, a2, a3, g3)
        _jt(z2[0], z2[1], z2[2], h / 3.0 * w[0] + 0.5 * h * g3[0],
            h / 3.0 * w[1] + 0.5 * h * g3[1], h / 3.0 * w[2] + 0.5 * h * g3[2],
            a1, a2, a3, g2)
        _jt(x[0], x[1], x[2], h / 6.0 * w[0] + 0.5 * h * g2[0],
            h / 6.0 * w[1] + 0.5 * h * g2[1], h / 6.0 * w[2] + 0.5 * h * g2[2],
            a1, a2, a3, g1)
        for i in range(3):
            out[t, i] = w[i] + g1[i] + g2[i] + g3[i] + g4[i]


def bicycle_cost_grad(double[::1] u, double[::1] x0, double[::1] u_prev,
                      double[::1] qs, double[::1] qn, double[::1] rw, double ts,
                      double length, double alpha, double[:, ::1] X, double[::1] g,
                      bint want_grad):
    cdef Py_ssize_t N = u.shape[0] // 2, t, k
    cdef double total = 0.0, diff, nxt
    cdef double l0, l1, l2, l3, psi, v, d, c, s, cd, n2, n3
    bicycle_rollout(u, x0, ts, length, alpha, X)
    for t in range(N):
        for k in range(4):
            total += qs[k] * X[t, k] * X[t, k]
    for k in range(4):
        total += qn[k] * X[N, k] * X[N, k]
    for k in range(2):
        for t in range(N):
            diff = u[2 * t + k] - (u_prev[k] if t == 0 else u[2 * t - 2 + k])
            total += rw[k] * diff * diff
    if not want_grad:
        return total
    l0 = 2.0 * qn[0] * X[N, 0]
    l1 = 2.0 * qn[1] * X[N, 1]
    l2 = 2.0 * qn[2] * X[N, 2]
    l3 = 2.0 * qn[3] * X[N, 3]
    for t in range(N - 1, -1, -1):
        psi = X[t, 2]
        v = X[t, 3]
        d = u[2 * t + 1]
        c = cos(psi)
        s = sin(psi)
        cd = cos(d)
        g[2 * t] = ts * alpha * l3
        g[2 * t + 1] = ts * v / (length * cd * cd) * l2
        n2 = l2 + ts * (-v * s * l0 + v * c * l1)
        n3 = l3 + ts * (c * l0 + s * l1 + tan(d) / length * l2 - alpha * l3)
        l0 = 2.0 * qs[0] * X[t, 0] + l0
        l1 = 2.0 * qs[1] * X[t, 1] + l1
        l2 = 2.0 * qs[2] * X[t, 2] + n2
        l3 = 2.0 * qs[3] * X[t, 3] + n3
    for k in range(2):
        for t in range(N):
            diff = u[2 * t + k] - (u_prev[k] if t == 0 else u[2 * t - 2 + k])
            g[2 * t + k] += 2.0 * rw[k] * diff
            if t + 1 < N:
                nxt = u[2 * t + 2 + k] - u[2 * t + k]
                g[2 * t + k] -= 2.0 * rw[k] * nxt
    return total


def bicycle_obstacle_vjp(double[::1] u, double[:, ::1] X, double[::1] w, double xc,
                         double yc, double ts, double length, double alpha,
                         double[::1] out):
    """Adjoint of ``sum_t w[t-1] * h(x_t)`` with ``h = r^2 - |pos - centre|^2``."""
    cdef Py_ssize_t N = u.shape[0] // 2, t
    cdef double l0 = -2.0 * (X[N, 0] - xc) * w[N - 1]
    cdef double l1 = -2.0 * (X[N, 1] - yc) * w[N - 1]
    cdef double l2 = 0.0, l3 = 0.0
    cdef double psi, v, d, c, s, cd, n2, n3
    for t in range(N - 1, -1, -1):
        psi = X[t, 2]
        v = X[t, 3]
        d = u[2 * t + 1]
        c = cos(psi)
        s = sin(psi)
        cd = cos(d)
        out[2 * t] = ts * alpha * l3
        out[2 * t + 1] = ts * v / (length * cd * cd) * l2
        n2 = l2 + ts * (-v * s * l0 + v * c * l1)
        n3 = l3 + ts * (c * l0 + s * l1 + tan(d) / length * l2 - alpha * l3)
        if t > 0:
            l0 = l0 - 2.0 * (X[t, 0] - xc) * w[t - 1]
            l1 = l1 - 2.0 * (X[t, 1] - yc) * w[t - 1]
        l2 = n2
        l3 = n3
