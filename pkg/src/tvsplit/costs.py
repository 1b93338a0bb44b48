"""Cost models and proximal operators.

This module defines the two cost abstractions used across the package, a
concrete quadratic cost with closed-form proximal map, a container for the
derivative bounds that drive the error analysis, and a small library of
proximal operators with the dense linear algebra they need.

The model throughout is the composite problem

    min_x  f(x; t) + g(x)

where ``f`` is smooth, strongly convex, and parameterized by time, and ``g``
is proper, closed, convex, and accessed only through its proximal map.
Problems are desk scale (n up to a few hundred), so all linear algebra is
dense and factorizations are cached where a matrix is reused.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvalsh, LinAlgError


@dataclass(frozen=True)
class SmoothCost:
    """Time-parameterized smooth strongly convex cost.

    Parameters
    ----------
    grad : callable
        ``grad(x, t) -> ndarray``, the gradient of f with respect to x.
    hessian : callable
        ``hessian(x, t) -> ndarray``, the Hessian of f with respect to x.
    m : float
        Strong convexity modulus, positive.
    L : float
        Lipschitz constant of the gradient, with ``L >= m``.
    grad_time : callable, optional
        ``grad_time(x, t) -> ndarray``, the mixed derivative of the gradient
        with respect to time. Required by the analytic prediction mode.
    exact_prox : callable, optional
        ``exact_prox(v, t, rho) -> ndarray`` solving
        ``argmin_y f(y; t) + ||y - v||^2 / (2 rho)`` exactly. Required by
        Douglas-Rachford splitting.
    value : callable, optional
        ``value(x, t) -> float``, the scalar cost. Only used by validation
        utilities; the solvers never need it.

    Notes
    -----
    ``m`` and ``L`` are declared by the model builder, not estimated. Use
    :func:`curvature_range` to check a declaration against sampled Hessians.
    """

    grad: Callable[[np.ndarray, float], np.ndarray]
    hessian: Callable[[np.ndarray, float], np.ndarray]
    m: float
    L: float
    grad_time: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    exact_prox: Optional[Callable[[np.ndarray, float, float], np.ndarray]] = None
    value: Optional[Callable[[np.ndarray, float], float]] = None

    def __post_init__(self):
        if not (0.0 < self.m <= self.L):
            raise ValueError(
                f"curvature bounds must satisfy 0 < m <= L, got m={self.m}, L={self.L}"
            )


@dataclass(frozen=True)
class NonsmoothCost:
    """Proper closed convex cost accessed through its proximal map.

    Parameters
    ----------
    prox : callable
        ``prox(x, rho) -> ndarray`` evaluating
        ``argmin_y g(y) + ||y - x||^2 / (2 rho)``.
    kernel : tuple, optional
        Structural tag consumed by the compiled iteration kernels. One of
        ``("zero",)``, ``("l1", weight)``, or ``("affine", P, r)`` where the
        projection is ``P @ x + r``. Costs without a tag still work through
        the generic Python path.
    """

    prox: Callable[[np.ndarray, float], np.ndarray]
    kernel: Optional[tuple] = None


@dataclass(frozen=True)
class DerivativeBounds:
    """Uniform bounds on the time and space derivatives of the gradient.

    ``C0`` bounds the gradient's time derivative, ``C1`` the third x
    derivative, ``C2`` the mixed xx-t derivative, and ``C3`` the t-t
    derivative of the gradient. All must be finite and nonnegative; zero is
    meaningful (a vanishing bound switches off the matching error term).
    """

    C0: float
    C1: float
    C2: float
    C3: float

    def __post_init__(self):
        for name in ("C0", "C1", "C2", "C3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"derivative bound {name} must be finite and >= 0, got {v}")


class QuadraticCost:
    """Time-invariant quadratic cost ``0.5 x'Qx + q'x`` with SPD ``Q``.

    Implements the :class:`SmoothCost` interface with ``m`` and ``L`` equal
    to the extreme eigenvalues of ``Q`` (or tighter declared values), plus a
    closed-form proximal map obtained from the SPD solve
    ``(I + rho Q) y = v - rho q``. Cholesky factors of ``I + rho Q`` are
    cached per step size, since splitting iterations reuse one ``rho``.
    """

    def __init__(self, Q, q, m=None, L=None):
        Q = np.asarray(Q, dtype=float)
        q = np.asarray(q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        if q.shape != (Q.shape[0],):
            raise ValueError(f"q has shape {q.shape}, expected ({Q.shape[0]},)")
        self.Q = Q
        self.q = q
        if m is None or L is None:
            w = eigvalsh(Q)
            m = float(w[0]) if m is None else m
            L = float(w[-1]) if L is None else L
        if not (0.0 < m <= L):
            raise ValueError(f"quadratic cost needs 0 < m <= L, got m={m}, L={L}")
        self.m = float(m)
        self.L = float(L)
        self._prox_cache = {}

    @property
    def n(self):
        return self.Q.shape[0]

    def value(self, x, t=0.0):
        return 0.5 * float(x @ self.Q @ x) + float(self.q @ x)

    def grad(self, x, t=0.0):
        return self.Q @ x + self.q

    def hessian(self, x, t=0.0):
        return self.Q

    def grad_time(self, x, t=0.0):
        return np.zeros(self.n)

    def exact_prox(self, v, t=0.0, rho=1.0):
        if rho <= 0.0:
            raise ValueError(f"prox step size must be positive, got {rho}")
        key = float(rho)
        fac = self._prox_cache.get(key)
        if fac is None:
            fac = cho_factor(np.eye(self.n) + rho * self.Q, lower=True)
            self._prox_cache[key] = fac
        return cho_solve(fac, v - rho * self.q)


def build_quadratic(Q, q):
    """Build a :class:`QuadraticCost`, rejecting non-SPD matrices.

    ``Q`` must be symmetric positive definite; ``m`` and ``L`` are set to its
    extreme eigenvalues.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"Q must be square, got shape {Q.shape}")
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-10 * (1.0 + np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    w = eigvalsh(Q)
    if w[0] <= 0.0:
        raise ValueError(f"Q must be positive definite, smallest eigenvalue {w[0]:.3e}")
    return QuadraticCost(Q, q, m=float(w[0]), L=float(w[-1]))


def prox_l1(x, rho, weight=1.0):
    """Soft-thresholding, the proximal map of ``weight * ||x||_1``.

    Componentwise ``sign(x_i) * max(|x_i| - rho * weight, 0)``.
    """
    if rho <= 0.0:
        raise ValueError(f"prox step size must be positive, got {rho}")
    if weight <= 0.0:
        raise ValueError(f"l1 weight must be positive, got {weight}")
    x = np.asarray(x, dtype=float)
    thr = rho * weight
    return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


class AffineProjection:
    """Euclidean projection onto ``{x : A x = b}`` with a cached factorization.

    The Cholesky factor of ``A A'`` is computed once at construction; each
    call costs two matrix-vector products and one triangular solve pair. The
    projection is the proximal map of the indicator of the affine set and is
    independent of the prox step size.
    """

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        self.A = A
        self.b = b
        gram = A @ A.T
        try:
            self._fac = cho_factor(gram, lower=True)
        except LinAlgError as exc:
            raise LinAlgError(
                "Cholesky factorization of A @ A' failed; A must have full row rank"
            ) from exc

    def __call__(self, x):
        return x - self.A.T @ cho_solve(self._fac, self.A @ x - self.b)

    def as_matrix(self):
        """Return ``(P, r)`` with ``proj(x) = P @ x + r`` as dense arrays."""
        n = self.A.shape[1]
        P = np.eye(n) - self.A.T @ cho_solve(self._fac, self.A)
        r = self.A.T @ cho_solve(self._fac, self.b)
        return P, r


def prox_affine_indicator(x, A, b):
    """Project ``x`` onto ``{y : A y = b}``.

    Convenience form that factorizes on every call; reuse
    :func:`affine_constraint_cost` when the same constraint set is projected
    onto repeatedly.
    """
    return AffineProjection(A, b)(np.asarray(x, dtype=float))


def prox_quadratic(cost, v, rho):
    """Proximal map of a :class:`QuadraticCost` at ``v`` with step ``rho``."""
    return cost.exact_prox(np.asarray(v, dtype=float), 0.0, rho)


def zero_cost():
    """The identically-zero nonsmooth cost; its prox is the identity."""
    return NonsmoothCost(prox=lambda x, rho: np.asarray(x, dtype=float), kernel=("zero",))


def l1_cost(weight=1.0):
    """``weight * ||x||_1`` as a :class:`NonsmoothCost`."""
    if weight <= 0.0:
        raise ValueError(f"l1 weight must be positive, got {weight}")
    return NonsmoothCost(
        prox=lambda x, rho: prox_l1(x, rho, weight),
        kernel=("l1", float(weight)),
    )


def affine_constraint_cost(A, b):
    """Indicator of ``{x : A x = b}`` as a :class:`NonsmoothCost`.

    The projection matrix and offset are precomputed so both the Python path
    and the compiled kernels reuse the same cached factorization.
    """
    proj = AffineProjection(A, b)
    P, r = proj.as_matrix()
    return NonsmoothCost(prox=lambda x, rho: proj(np.asarray(x, dtype=float)), kernel=("affine", P, r))


def curvature_range(cost, points, times):
    """Sample the Hessian spectrum of a smooth cost.

    Parameters
    ----------
    cost : SmoothCost or QuadraticCost
    points : iterable of ndarray
    times : iterable of float

    Returns
    -------
    (lo, hi, asym) : tuple of floats
        Smallest and largest eigenvalue over all samples, and the largest
        symmetry defect ``max |H - H'|`` observed.
    """
    lo, hi, asym = np.inf, -np.inf, 0.0
    for x, t in zip(points, times):
        H = np.asarray(cost.hessian(np.asarray(x, dtype=float), float(t)))
        asym = max(asym, float(np.abs(H - H.T).max()))
        w = eigvalsh(0.5 * (H + H.T))
        lo = min(lo, float(w[0]))
        hi = max(hi, float(w[-1]))
    return lo, hi, asym


def validate_curvature(cost, points, times, tol=1e-8):
    """Check declared ``(m, L)`` against sampled Hessian eigenvalues.

    Raises ``ValueError`` if any sampled eigenvalue leaves ``[m - tol, L + tol]``
    or a sampled Hessian is asymmetric beyond ``tol``.
    """
    lo, hi, asym = curvature_range(cost, points, times)
    if asym > tol:
        raise ValueError(f"sampled Hessian asymmetry {asym:.3e} exceeds tolerance {tol:.1e}")
    if lo < cost.m - tol or hi > cost.L + tol:
        raise ValueError(
            f"sampled Hessian spectrum [{lo:.6g}, {hi:.6g}] leaves declared "
            f"[m, L] = [{cost.m:.6g}, {cost.L:.6g}] beyond tolerance {tol:.1e}"
        )
