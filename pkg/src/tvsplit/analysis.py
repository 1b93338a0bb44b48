"""Closed-form convergence conditions, error-recursion coefficients, bounds.

The tracking error e_k of the online loop obeys a per-step recursion

    e_{k+1} <= eta2 * e_k^2 + eta1 * e_k + eta0

whose coefficients depend on the k-step contraction factors of the splitting,
the curvature bounds (m, L), the derivative bounds (C0..C3), and the sampling
period. Two coefficient sets exist: a linear regime that ignores curvature
variation (eta2 = 0, global convergence condition) and a quadratic regime
that tracks it (local convergence inside a radius). This module evaluates
those coefficients, the convergence condition, the largest admissible
sampling period and convergence radius, the recursion envelope, and an
empirical Lipschitz test of the solution mapping.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import kernels
from .costs import DerivativeBounds, SmoothCost
from .splitting import balanced_step

_INF = math.inf


class Regime(Enum):
    LINEAR = "Linear"
    QUADRATIC = "Quadratic"


@dataclass(frozen=True)
class EtaCoefficients:
    """Coefficients of the per-step error recursion, tagged with the regime."""

    eta2: float
    eta1: float
    eta0: float
    regime: Regime

    def __post_init__(self):
        if min(self.eta2, self.eta1, self.eta0) < 0.0:
            raise ValueError("error-recursion coefficients must be nonnegative")
        if self.regime is Regime.LINEAR and self.eta2 != 0.0:
            raise ValueError("the linear regime has no quadratic term")


@dataclass(frozen=True)
class RegimeInputs:
    """Everything the closed-form bounds consume.

    The k-step factors (prefactor included) are supplied precomposed from a
    :class:`~tvsplit.splitting.RateEstimate`; nothing here assumes how they
    combine.
    """

    zetaP: float
    zetaC: float
    zetaPC: float
    m: float
    L: float
    bounds: DerivativeBounds
    Ts: float
    tau: float

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not (0.0 < self.m <= self.L):
            raise ValueError(f"need 0 < m <= L, got m={self.m}, L={self.L}")
        if self.Ts <= 0.0:
            raise ValueError(f"sampling period must be positive, got {self.Ts}")


@dataclass(frozen=True)
class ConvergenceReport:
    """Evaluated conditions and bounds for one solver configuration.

    ``max_sampling_period`` and ``convergence_radius`` are ``math.inf`` when
    the relevant derivative bounds vanish and ``None`` when the requested
    configuration is infeasible (contraction too weak for the chosen tau).
    ``asymptote_estimate`` is the linear-regime envelope limit
    ``eta0 / (1 - eta1)``, ``None`` when ``eta1 >= 1``.
    """

    zetaP: float
    zetaC: float
    zetaPC: float
    condition_value: float
    condition_holds: bool
    tau: Optional[float]
    max_sampling_period: Optional[float]
    convergence_radius: Optional[float]
    eta_linear: EtaCoefficients
    eta_quadratic: EtaCoefficients
    asymptote_estimate: Optional[float]

    def __post_init__(self):
        if self.condition_holds != (self.condition_value < 1.0):
            raise ValueError("condition flag inconsistent with its value")


def tracking_condition(zetaP, zetaC, m, L):
    """Global convergence condition of the online loop.

    Evaluates ``zeta(C) * [zeta(P) + (zeta(P) + 1) * 2L/m]`` and returns
    ``(value, value < 1)``. The supplied factors must already include any
    trajectory prefactor.
    """
    if not (0.0 < m <= L):
        raise ValueError(f"need 0 < m <= L, got m={m}, L={L}")
    lhs = zetaC * (zetaP + (zetaP + 1.0) * 2.0 * L / m)
    return lhs, lhs < 1.0


def eta_linear(zetaP, zetaC, m, L, C0, Ts):
    """Error-recursion coefficients of the linear regime.

    The quadratic term is absent; the linear coefficient equals the tracking
    condition value, and the constant term scales with ``C0 * Ts / m``.
    """
    lhs, _ = tracking_condition(zetaP, zetaC, m, L)
    eta0 = zetaC * (2.0 * (zetaP + 1.0) * (1.0 + L / m) + zetaP) * C0 * Ts / m
    return EtaCoefficients(eta2=0.0, eta1=lhs, eta0=eta0, regime=Regime.LINEAR)


def eta_quadratic(zetaP, zetaC, m, bounds, Ts):
    """Error-recursion coefficients of the quadratic regime."""
    if m <= 0.0:
        raise ValueError(f"m must be positive, got {m}")
    if Ts <= 0.0:
        raise ValueError(f"sampling period must be positive, got {Ts}")
    C0, C1, C2, C3 = bounds.C0, bounds.C1, bounds.C2, bounds.C3
    eta2 = zetaC * (zetaP + 1.0) * C1 / (2.0 * m)
    eta1 = zetaC * (zetaP + Ts * (zetaP + 1.0) * (C0 * C1 / m**2 + C2 / m))
    eta0 = zetaC * (
        zetaP * Ts * C0 / m
        + (zetaP + 1.0) * (Ts**2 / 2.0) * (C0**2 * C1 / m**3 + 2.0 * C0 * C2 / m**2 + C3 / m)
    )
    return EtaCoefficients(eta2=eta2, eta1=eta1, eta0=eta0, regime=Regime.QUADRATIC)


def max_sampling_period(tau, zetaP, zetaC, zetaPC, m, bounds):
    """Largest sampling period keeping the quadratic-regime contraction below tau.

    Returns ``math.inf`` when the Taylor-error denominator
    ``C0 C1 / m^2 + C2 / m`` vanishes (linear gradient drift imposes no
    sampling bound). Raises when ``zeta(P+C) >= tau``, which no sampling
    period can repair.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if m <= 0.0:
        raise ValueError(f"m must be positive, got {m}")
    if zetaPC >= tau:
        raise ValueError(
            f"combined factor zeta(P+C) = {zetaPC:.6g} is not below tau = {tau:.6g}; "
            "increase P or C or relax tau"
        )
    denom = bounds.C0 * bounds.C1 / m**2 + bounds.C2 / m
    if denom == 0.0:
        return _INF
    return (tau - zetaPC) / (zetaC * (zetaP + 1.0)) / denom


def convergence_radius(ts_bar_val, Ts, m, bounds):
    """Radius of the error region where the quadratic-regime recursion contracts.

    Computed as ``(2m / C1) (C0 C1 / m^2 + C2 / m) (ts_bar - Ts)``; infinite
    when ``C1 = 0``. Raises when ``Ts >= ts_bar``.
    """
    if Ts <= 0.0:
        raise ValueError(f"sampling period must be positive, got {Ts}")
    if Ts >= ts_bar_val:
        raise ValueError(
            f"sampling period {Ts:.6g} is not below its bound {ts_bar_val:.6g}"
        )
    if bounds.C1 == 0.0:
        return _INF
    return (2.0 * m / bounds.C1) * (bounds.C0 * bounds.C1 / m**2 + bounds.C2 / m) * (ts_bar_val - Ts)


def error_envelope(e0, etas, steps):
    """Iterate the error recursion from ``e0`` for ``steps`` steps.

    Returns the full sequence ``[e0, e1, ..., e_steps]``. Divergent envelopes
    are returned as computed, without clamping. In the linear regime with
    ``eta1 < 1`` the sequence approaches ``eta0 / (1 - eta1)``.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    env = [float(e0)]
    e = float(e0)
    for _ in range(steps):
        e = etas.eta2 * e * e + etas.eta1 * e + etas.eta0
        env.append(e)
    return env


@dataclass(frozen=True)
class LipschitzTestReport:
    """Outcome of the empirical solution-mapping Lipschitz test."""

    max_ratio: float
    bound: float
    holds: bool
    pairs_checked: int
    inconclusive: bool


def solution_map_lipschitz_test(smooth, nonsmooth, tilts, tolerance=1e-6,
                                oracle_iters=10000, rho=None):
    """Check that the tilted-solution map is ``1/m``-Lipschitz.

    For each tilt vector p, solves ``min f(y) + g(y) - <p, y>`` with a long
    forward-backward run, then compares ``||S(p) - S(q)|| / ||p - q||``
    against ``1/m + tolerance`` over all distinct pairs. Coincident tilt
    pairs are skipped. If the oracle fails to reach a small fixed-point
    residual on some tilt, the report is flagged inconclusive.

    The smooth cost is taken frozen at time 0; quadratic costs with a tagged
    nonsmooth part run through the batched compiled kernels.
    """
    tilts = [np.asarray(p, dtype=float) for p in tilts]
    if len(tilts) < 2:
        raise ValueError("need at least two tilt vectors")
    if rho is None:
        rho = balanced_step("fb", smooth.m, smooth.L)
    spec = kernels.unpack_kernel(getattr(nonsmooth, "kernel", None), rho)
    if spec is not None and hasattr(smooth, "Q") and hasattr(smooth, "q"):
        kind, thr, P, r = spec
        n = smooth.Q.shape[0]
        G = np.eye(n) - rho * smooth.Q
        # column b solves the problem tilted by tilts[b]
        Cmat = np.stack([-rho * (smooth.q - p) for p in tilts], axis=1)
        X = kernels.fb_batch_final(G, Cmat, np.zeros((n, len(tilts))), oracle_iters, kind, thr, P, r)
        X1 = kernels.fb_batch_final(G, Cmat, X, 1, kind, thr, P, r)
        residuals = np.linalg.norm(X1 - X, axis=0)
        solutions = [X1[:, i] for i in range(len(tilts))]
    else:
        solutions = []
        residuals = []
        for p in tilts:
            def tilted_grad(x, t, _p=p):
                return smooth.grad(x, t) - _p
            x = np.zeros_like(tilts[0])
            for _ in range(oracle_iters):
                x = nonsmooth.prox(x - rho * tilted_grad(x, 0.0), rho)
            x1 = nonsmooth.prox(x - rho * tilted_grad(x, 0.0), rho)
            residuals.append(float(np.linalg.norm(x1 - x)))
            solutions.append(x1)
        residuals = np.asarray(residuals)
    scale = 1.0 + max(float(np.linalg.norm(s)) for s in solutions)
    inconclusive = bool(np.any(residuals > 1e-9 * scale))
    max_ratio = 0.0
    pairs = 0
    for i in range(len(tilts)):
        for j in range(i + 1, len(tilts)):
            gap = float(np.linalg.norm(tilts[i] - tilts[j]))
            if gap == 0.0:
                continue
            ratio = float(np.linalg.norm(solutions[i] - solutions[j])) / gap
            max_ratio = max(max_ratio, ratio)
            pairs += 1
    bound = 1.0 / smooth.m + tolerance
    return LipschitzTestReport(
        max_ratio=max_ratio,
        bound=bound,
        holds=max_ratio <= bound and not inconclusive,
        pairs_checked=pairs,
        inconclusive=inconclusive,
    )


@dataclass(frozen=True)
class TrackingProblem:
    """A smooth tracking cost with known optimum and derivative bounds."""

    smooth: SmoothCost
    bounds: DerivativeBounds
    optimum: Callable[[float], np.ndarray]
    n: int


def sinusoid_tracking_problem(amplitude=1.0, omega=1.0, dimension=5):
    """``f(x; t) = 0.5 ||x - r(t)||^2`` with ``r(t) = amplitude sin(omega t) 1``.

    The Hessian is the identity, so the third-derivative and mixed bounds
    vanish (C1 = C2 = 0) and the remaining bounds are exact:
    ``C0 = amplitude |omega| sqrt(n)`` and ``C3 = amplitude omega^2 sqrt(n)``.
    The optimum is ``r(t)`` itself, which makes every bound checkable against
    closed-form truth.
    """
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    a, w, n = float(amplitude), float(omega), int(dimension)
    ones = np.ones(n)
    eye = np.eye(n)

    def r(t):
        return a * math.sin(w * t) * ones

    smooth = SmoothCost(
        grad=lambda x, t: x - r(t),
        hessian=lambda x, t: eye,
        m=1.0,
        L=1.0,
        grad_time=lambda x, t: -a * w * math.cos(w * t) * ones,
        exact_prox=lambda v, t, rho: (v + rho * r(t)) / (1.0 + rho),
        value=lambda x, t: 0.5 * float(np.sum((x - r(t)) ** 2)),
    )
    bounds = DerivativeBounds(
        C0=abs(a * w) * math.sqrt(n),
        C1=0.0,
        C2=0.0,
        C3=abs(a) * w * w * math.sqrt(n),
    )
    return TrackingProblem(smooth=smooth, bounds=bounds, optimum=r, n=n)


def convergence_report(rate, P, C, m, L, bounds, Ts, tau=None):
    """Assemble a :class:`ConvergenceReport` from a per-step rate estimate.

    ``rate`` is the :class:`~tvsplit.splitting.RateEstimate` of the chosen
    splitting on the target cost; k-step factors are composed as
    ``rate.power(k)``. When ``tau`` is omitted, the midpoint between
    ``zeta(P+C)`` and 1 is used if that interval is nonempty, otherwise the
    sampling-period section is reported infeasible.
    """
    zetaP = rate.power(P)
    zetaC = rate.power(C)
    zetaPC = rate.power(P + C)
    value, holds = tracking_condition(zetaP, zetaC, m, L)
    lin = eta_linear(zetaP, zetaC, m, L, bounds.C0, Ts)
    quad = eta_quadratic(zetaP, zetaC, m, bounds, Ts)
    if tau is None and zetaPC < 1.0:
        tau = (1.0 + zetaPC) / 2.0
    ts_bar = None
    r_bar = None
    if tau is not None and zetaPC < tau:
        ts_bar = max_sampling_period(tau, zetaP, zetaC, zetaPC, m, bounds)
        if Ts < ts_bar:
            r_bar = convergence_radius(ts_bar, Ts, m, bounds)
    else:
        tau = None
    asymptote = lin.eta0 / (1.0 - lin.eta1) if lin.eta1 < 1.0 else None
    return ConvergenceReport(
        zetaP=zetaP,
        zetaC=zetaC,
        zetaPC=zetaPC,
        condition_value=value,
        condition_holds=holds,
        tau=tau,
        max_sampling_period=ts_bar,
        convergence_radius=r_bar,
        eta_linear=lin,
        eta_quadratic=quad,
        asymptote_estimate=asymptote,
    )
