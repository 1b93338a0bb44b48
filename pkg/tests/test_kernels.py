"""Compiled extension against the pure numpy fallback, op by op.

Both backends implement the same contracts; the compiled one must agree with
the fallback to float64 roundoff on every kernel, and each backend must be
bit-deterministic with itself. Raw backend functions take the prox dispatch
as ``(kind, thr, P, r)`` with dummy ``P``/``r`` for non-affine kinds, the
same convention the ``kernels`` wrappers use.
"""

import numpy as np
import pytest

import tvsplit._purekernels as pure
from tvsplit import kernels
from tvsplit.costs import affine_constraint_cost, l1_cost, zero_cost

try:
    import tvsplit._kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(
    compiled is None, reason="compiled extension not built"
)

DUMMY_P = np.zeros((1, 1))
DUMMY_R = np.zeros(1)


def fb_setup(n, seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((n, n))
    Q = M @ M.T + 0.4 * np.eye(n)
    rho = 1.0 / float(np.linalg.eigvalsh(Q)[-1])
    G = np.eye(n) - rho * Q
    c = -rho * r.standard_normal(n)
    x0 = r.standard_normal(n)
    return G, c, x0, rho


def dr_setup(n, seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((n, n))
    Q = M @ M.T + 0.4 * np.eye(n)
    rho = 0.3
    S = np.linalg.inv(np.eye(n) + rho * Q)
    s = -rho * (S @ r.standard_normal(n))
    z0 = r.standard_normal(n)
    return S, s, z0


def kernel_cases(n, seed):
    """(kind, thr, P, r) dispatch triples: identity, soft threshold, affine."""
    r = np.random.default_rng(seed)
    A = r.standard_normal((2, n))
    b = r.standard_normal(2)
    _, P, rr = affine_constraint_cost(A, b).kernel
    return [
        (0, 0.0, DUMMY_P, DUMMY_R),
        (1, 0.23, DUMMY_P, DUMMY_R),
        (2, 0.0, np.ascontiguousarray(P), np.ascontiguousarray(rr)),
    ]


@needs_compiled
@pytest.mark.parametrize("steps", [0, 1, 7, 60])
def test_fb_final_backends_agree(steps):
    G, c, x0, _ = fb_setup(9, 5)
    for kind, thr, P, r in kernel_cases(9, 6):
        out_c = compiled.fb_final(G, c, x0, steps, kind, thr, P, r)
        out_p = pure.fb_final(G, c, x0, steps, kind, thr, P, r)
        np.testing.assert_allclose(out_c, out_p, rtol=0, atol=1e-13)


@needs_compiled
def test_fb_trace_backends_agree():
    G, c, x0, _ = fb_setup(7, 15)
    for kind, thr, P, r in kernel_cases(7, 16):
        tc = compiled.fb_trace(G, c, x0, 25, kind, thr, P, r)
        tp = pure.fb_trace(G, c, x0, 25, kind, thr, P, r)
        assert np.asarray(tc).shape == (26, 7)
        np.testing.assert_allclose(np.asarray(tc)[0], x0, atol=0)
        np.testing.assert_allclose(tc, tp, rtol=0, atol=1e-13)


@needs_compiled
def test_fb_batch_backends_agree_and_match_columnwise():
    n, B = 6, 17
    G, c, x0, _ = fb_setup(n, 33)
    X0 = np.random.default_rng(34).standard_normal((n, B))
    C = np.tile(c[:, None], (1, B)) + 0.1 * np.random.default_rng(35).standard_normal((n, B))
    for kind, thr, P, r in kernel_cases(n, 36):
        out_c = compiled.fb_batch_final(G, np.ascontiguousarray(C),
                                        np.ascontiguousarray(X0), 40, kind, thr, P, r)
        out_p = pure.fb_batch_final(G, C, X0, 40, kind, thr, P, r)
        np.testing.assert_allclose(out_c, out_p, rtol=0, atol=1e-12)
        # batch column j equals a single-vector run with its own tilt
        for j in (0, B - 1):
            single = compiled.fb_final(G, np.ascontiguousarray(C[:, j]),
                                       np.ascontiguousarray(X0[:, j]), 40, kind, thr, P, r)
            np.testing.assert_allclose(np.asarray(out_c)[:, j], single, rtol=0, atol=1e-11)


@needs_compiled
@pytest.mark.parametrize("steps", [0, 1, 30])
def test_dr_final_backends_agree(steps):
    S, s, z0 = dr_setup(8, 44)
    for kind, thr, P, r in kernel_cases(8, 45):
        xc, yc, zc = compiled.dr_final(S, s, z0, steps, kind, thr, P, r)
        xp, yp, zp = pure.dr_final(S, s, z0, steps, kind, thr, P, r)
        np.testing.assert_allclose(xc, xp, rtol=0, atol=1e-13)
        np.testing.assert_allclose(yc, yp, rtol=0, atol=1e-13)
        np.testing.assert_allclose(zc, zp, rtol=0, atol=1e-13)


@needs_compiled
def test_dr_trace_backends_agree():
    S, s, z0 = dr_setup(5, 50)
    for kind, thr, P, r in kernel_cases(5, 51):
        tc = compiled.dr_trace_x(S, s, z0, 20, kind, thr, P, r)
        tp = pure.dr_trace_x(S, s, z0, 20, kind, thr, P, r)
        assert np.asarray(tc).shape == (21, 5)
        np.testing.assert_allclose(np.asarray(tc)[0], S @ z0 + s, atol=1e-13)
        np.testing.assert_allclose(tc, tp, rtol=0, atol=1e-13)


def test_wrapper_fb_final_zero_steps_returns_copy():
    G, c, x0, _ = fb_setup(4, 60)
    out = kernels.fb_final(G, c, x0, 0, 0, 0.0)
    np.testing.assert_allclose(out, x0, atol=0)
    out[:] = 0.0
    assert x0[0] != 0.0  # the zero-step result is a copy, not a view


def test_wrapper_determinism():
    G, c, x0, _ = fb_setup(10, 70)
    a = kernels.fb_final(G, c, x0, 200, 1, 0.05)
    b = kernels.fb_final(G, c, x0, 200, 1, 0.05)
    assert np.array_equal(a, b)


def test_wrapper_dispatch_matches_raw_backends():
    G, c, x0, _ = fb_setup(6, 81)
    for kind, thr, P, r in kernel_cases(6, 82):
        via_wrapper = kernels.fb_final(G, c, x0, 12, kind, thr, P, r)
        via_pure = pure.fb_final(G, c, x0, 12, kind, thr, P, r)
        np.testing.assert_allclose(via_wrapper, via_pure, rtol=0, atol=1e-13)


def test_unpack_kernel_tags():
    rho = 0.5
    assert kernels.unpack_kernel(zero_cost().kernel, rho)[0] == 0
    kind, thr, _, _ = kernels.unpack_kernel(l1_cost(0.4).kernel, rho)
    assert kind == 1
    assert thr == pytest.approx(rho * 0.4)
    A = np.array([[1.0, 0.0]])
    g = affine_constraint_cost(A, np.array([1.0]))
    kind, _, P, r = kernels.unpack_kernel(g.kernel, rho)
    assert kind == 2
    np.testing.assert_allclose(P @ np.array([5.0, 2.0]) + r, np.array([1.0, 2.0]), atol=1e-12)
    assert kernels.unpack_kernel(None, rho) is None
    assert kernels.unpack_kernel(("mystery",), rho) is None


def test_backend_name_reports_active_choice():
    assert kernels.backend_name() in ("compiled", "python")
    assert kernels.backend_name() == kernels.BACKEND
