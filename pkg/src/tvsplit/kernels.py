"""Backend selection and marshaling for the iteration kernels.

At import time the compiled extension is preferred; the numpy fallback is
used when the extension is missing or ``TVSPLIT_PURE_PYTHON=1`` is set in the
environment. Both backends implement identical semantics, though they order
floating-point operations differently, so results agree to roundoff rather
than bit-for-bit across backends.
"""

import os

import numpy as np

if os.environ.get("TVSPLIT_PURE_PYTHON", "") == "1":
    from . import _purekernels as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _purekernels as _impl

BACKEND = _impl.BACKEND

_DUMMY_P = np.zeros((1, 1))
_DUMMY_R = np.zeros(1)


def backend_name():
    """Name of the active kernel backend, ``"compiled"`` or ``"python"``."""
    return BACKEND


def unpack_kernel(kernel, rho):
    """Translate a ``NonsmoothCost.kernel`` tag into kernel arguments.

    Returns ``(kind, thr, P, r)`` or ``None`` when the tag is missing or not
    recognized (callers then fall back to the generic Python path).
    """
    if not kernel:
        return None
    tag = kernel[0]
    if tag == "zero":
        return 0, 0.0, _DUMMY_P, _DUMMY_R
    if tag == "l1":
        return 1, float(rho) * float(kernel[1]), _DUMMY_P, _DUMMY_R
    if tag == "affine":
        P = np.ascontiguousarray(kernel[1], dtype=np.float64)
        r = np.ascontiguousarray(kernel[2], dtype=np.float64)
        return 2, 0.0, P, r
    return None


def _mat(M):
    return np.ascontiguousarray(M, dtype=np.float64)


def _vec(v):
    return np.ascontiguousarray(v, dtype=np.float64)


def fb_final(G, c, x0, steps, kind, thr=0.0, P=None, r=None):
    if steps == 0:
        return _vec(x0).copy()
    return _impl.fb_final(_mat(G), _vec(c), _vec(x0), int(steps), int(kind),
                          float(thr), _mat(P if P is not None else _DUMMY_P),
                          _vec(r if r is not None else _DUMMY_R))


def fb_trace(G, c, x0, steps, kind, thr=0.0, P=None, r=None):
    return _impl.fb_trace(_mat(G), _vec(c), _vec(x0), int(steps), int(kind),
                          float(thr), _mat(P if P is not None else _DUMMY_P),
                          _vec(r if r is not None else _DUMMY_R))


def fb_batch_final(G, C, X0, steps, kind, thr=0.0, P=None, r=None):
    return _impl.fb_batch_final(_mat(G), _mat(C), _mat(X0), int(steps), int(kind),
                                float(thr), _mat(P if P is not None else _DUMMY_P),
                                _vec(r if r is not None else _DUMMY_R))


def dr_final(S, s, z0, steps, kind, thr=0.0, P=None, r=None):
    return _impl.dr_final(_mat(S), _vec(s), _vec(z0), int(steps), int(kind),
                          float(thr), _mat(P if P is not None else _DUMMY_P),
                          _vec(r if r is not None else _DUMMY_R))


def dr_trace_x(S, s, z0, steps, kind, thr=0.0, P=None, r=None):
    return _impl.dr_trace_x(_mat(S), _vec(s), _vec(z0), int(steps), int(kind),
                            float(thr), _mat(P if P is not None else _DUMMY_P),
                            _vec(r if r is not None else _DUMMY_R))
