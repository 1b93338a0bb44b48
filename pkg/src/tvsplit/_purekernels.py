"""Pure numpy twins of the compiled iteration kernels.

Same call signatures and semantics as ``_kernels``; used when the extension
is unavailable or when ``TVSPLIT_PURE_PYTHON=1`` is set.
"""

import numpy as np

BACKEND = "python"


def _prox(v, kind, thr, P, r):
    if kind == 1:
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
    if kind == 2:
        if v.ndim == 2:
            return P @ v + r[:, None]
        return P @ v + r
    return v


def fb_final(G, c, x0, steps, kind, thr, P, r):
    x = x0.copy()
    for _ in range(steps):
        x = _prox(G @ x + c, kind, thr, P, r)
    return x


def fb_trace(G, c, x0, steps, kind, thr, P, r):
    out = np.empty((steps + 1, G.shape[0]))
    out[0] = x0
    x = x0.copy()
    for k in range(steps):
        x = _prox(G @ x + c, kind, thr, P, r)
        out[k + 1] = x
    return out


def fb_batch_final(G, C, X0, steps, kind, thr, P, r):
    X = X0.copy()
    for _ in range(steps):
        X = _prox(G @ X + C, kind, thr, P, r)
    return X


def dr_final(S, s, z0, steps, kind, thr, P, r):
    z = z0.copy()
    if steps == 0:
        x = S @ z + s
        return x, x.copy(), z
    for _ in range(steps):
        x = S @ z + s
        y = _prox(2.0 * x - z, kind, thr, P, r)
        z = z + y - x
    return x, y, z


def dr_trace_x(S, s, z0, steps, kind, thr, P, r):
    out = np.empty((steps + 1, S.shape[0]))
    z = z0.copy()
    for k in range(steps + 1):
        x = S @ z + s
        out[k] = x
        if k < steps:
            y = _prox(2.0 * x - z, kind, thr, P, r)
            z = z + y - x
    return out
