# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-point iteration kernels.

Hot loops for forward-backward and Douglas-Rachford iterations on quadratic
smooth costs with structured nonsmooth parts. The smooth part enters through
precomputed affine maps: ``G = I - rho Q``, ``c = -rho q`` for the gradient
step and ``S = (I + rho Q)^-1``, ``s = -rho S q`` for the quadratic prox.

Nonsmooth kinds: 0 identity, 1 soft threshold at ``thr``, 2 affine projection
``v -> P v + r``.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm, dgemv

cnp.import_array()

BACKEND = "compiled"


cdef inline void _matvec(double[:, ::1] M, double* x, double* out, int n) noexcept nogil:
    # out = M @ x for a C-contiguous square M, via the transposed F-order view
    cdef char trans = b'T'
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    dgemv(&trans, &n, &n, &one, &M[0, 0], &n, x, &inc, &zero, out, &inc)


cdef inline void _apply_prox(int kind, double thr, double[:, ::1] P, double[::1] r,
                             double* v, double* out, double* work, int n) noexcept nogil:
    cdef int i
    cdef double a
    if kind == 1:
        for i in range(n):
            a = v[i]
            if a > thr:
                out[i] = a - thr
            elif a < -thr:
                out[i] = a + thr
            else:
                out[i] = 0.0
    elif kind == 2:
        _matvec(P, v, work, n)
        for i in range(n):
            out[i] = work[i] + r[i]
    else:
        for i in range(n):
            out[i] = v[i]


def fb_final(double[:, ::1] G, double[::1] c, double[::1] x0, Py_ssize_t steps,
             int kind, double thr, double[:, ::1] P, double[::1] r):
    """Apply ``x <- prox(G @ x + c)`` ``steps`` times, return the final x."""
    cdef int n = G.shape[0]
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    y_arr = np.empty(n, dtype=np.float64)
    w_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr, y = y_arr, w = w_arr
    cdef Py_ssize_t it
    cdef int i
    with nogil:
        for it in range(steps):
            _matvec(G, &x[0], &y[0], n)
            for i in range(n):
                y[i] += c[i]
            _apply_prox(kind, thr, P, r, &y[0], &x[0], &w[0], n)
    return x_arr


def fb_trace(double[:, ::1] G, double[::1] c, double[::1] x0, Py_ssize_t steps,
             int kind, double thr, double[:, ::1] P, double[::1] r):
    """Like :func:`fb_final` but returns the whole trajectory, row k = x(k)."""
    cdef int n = G.shape[0]
    out_arr = np.empty((steps + 1, n), dtype=np.float64)
    y_arr = np.empty(n, dtype=np.float64)
    w_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] y = y_arr, w = w_arr
    cdef Py_ssize_t it
    cdef int i
    for i in range(n):
        out[0, i] = x0[i]
    with nogil:
        for it in range(steps):
            _matvec(G, &out[it, 0], &y[0], n)
            for i in range(n):
                y[i] += c[i]
            _apply_prox(kind, thr, P, r, &y[0], &out[it + 1, 0], &w[0], n)
    return out_arr


def fb_batch_final(double[:, ::1] G, double[:, ::1] C, double[:, ::1] X0,
                   Py_ssize_t steps, int kind, double thr,
                   double[:, ::1] P, double[::1] r):
    """Column-batched :func:`fb_final`: ``X <- prox(G @ X + C)`` per column."""
    cdef int n = G.shape[0]
    cdef int B = X0.shape[1]
    X_arr = np.array(X0, dtype=np.float64, copy=True)
    Y_arr = np.empty((n, B), dtype=np.float64)
    W_arr = np.empty((n, B), dtype=np.float64)
    cdef double[:, ::1] X = X_arr, Y = Y_arr, W = W_arr
    cdef char noT = b'N'
    cdef double one = 1.0, zero = 0.0
    cdef Py_ssize_t it
    cdef int i, j
    cdef double a
    with nogil:
        for it in range(steps):
            # Y = C; Y += G @ X  (C-order buffers seen as transposed F-order)
            for i in range(n):
                for j in range(B):
                    Y[i, j] = C[i, j]
            dgemm(&noT, &noT, &B, &n, &n, &one, &X[0, 0], &B, &G[0, 0], &n,
                  &one, &Y[0, 0], &B)
            if kind == 1:
                for i in range(n):
                    for j in range(B):
                        a = Y[i, j]
                        if a > thr:
                            X[i, j] = a - thr
                        elif a < -thr:
                            X[i, j] = a + thr
                        else:
                            X[i, j] = 0.0
            elif kind == 2:
                dgemm(&noT, &noT, &B, &n, &n, &one, &Y[0, 0], &B, &P[0, 0], &n,
                      &zero, &W[0, 0], &B)
                for i in range(n):
                    for j in range(B):
                        X[i, j] = W[i, j] + r[i]
            else:
                for i in range(n):
                    for j in range(B):
                        X[i, j] = Y[i, j]
    return X_arr


def dr_final(double[:, ::1] S, double[::1] s, double[::1] z0, Py_ssize_t steps,
             int kind, double thr, double[:, ::1] P, double[::1] r):
    """Douglas-Rachford iterations from auxiliary point ``z0``.

    Per step: ``x = S z + s``; ``y = prox(2x - z)``; ``z <- z + y - x``.
    Returns the final ``(x, y, z)``.
    """
    cdef int n = S.shape[0]
    x_arr = np.empty(n, dtype=np.float64)
    y_arr = np.empty(n, dtype=np.float64)
    z_arr = np.array(z0, dtype=np.float64, copy=True)
    v_arr = np.empty(n, dtype=np.float64)
    w_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr, y = y_arr, z = z_arr, v = v_arr, w = w_arr
    cdef Py_ssize_t it
    cdef int i
    if steps == 0:
        _matvec(S, &z[0], &x[0], n)
        for i in range(n):
            x[i] += s[i]
            y[i] = x[i]
        return x_arr, y_arr, z_arr
    with nogil:
        for it in range(steps):
            _matvec(S, &z[0], &x[0], n)
            for i in range(n):
                x[i] += s[i]
                v[i] = 2.0 * x[i] - z[i]
            _apply_prox(kind, thr, P, r, &v[0], &y[0], &w[0], n)
            for i in range(n):
                z[i] += y[i] - x[i]
    return x_arr, y_arr, z_arr


def dr_trace_x(double[:, ::1] S, double[::1] s, double[::1] z0, Py_ssize_t steps,
               int kind, double thr, double[:, ::1] P, double[::1] r):
    """Primal trajectory of Douglas-Rachford: row k = ``x(k) = S z(k) + s``."""
    cdef int n = S.shape[0]
    out_arr = np.empty((steps + 1, n), dtype=np.float64)
    y_arr = np.empty(n, dtype=np.float64)
    z_arr = np.array(z0, dtype=np.float64, copy=True)
    v_arr = np.empty(n, dtype=np.float64)
    w_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] y = y_arr, z = z_arr, v = v_arr, w = w_arr
    cdef Py_ssize_t it
    cdef int i
    with nogil:
        for it in range(steps + 1):
            _matvec(S, &z[0], &out[it, 0], n)
            for i in range(n):
                out[it, i] += s[i]
            if it < steps:
                for i in range(n):
                    v[i] = 2.0 * out[it, i] - z[i]
                _apply_prox(kind, thr, P, r, &v[0], &y[0], &w[0], n)
                for i in range(n):
                    z[i] += y[i] - out[it, i]
    return out_arr
