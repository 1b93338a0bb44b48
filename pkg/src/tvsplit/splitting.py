"""Operator splitting steps, fixed-point iteration, and contraction rates.

Two splittings are provided for the composite problem ``min f(x) + g(x)``
with ``f`` smooth and strongly convex (frozen at some time) and ``g``
accessed through its prox:

* forward-backward: ``x <- prox_{rho g}(x - rho grad f(x))``, needs
  ``rho < 2/L``;
* Douglas-Rachford: on an auxiliary variable z, ``x = prox_{rho f}(z)``,
  ``y = prox_{rho g}(2x - z)``, ``z <- z + y - x``, needs an exact prox of
  the smooth part and any ``rho > 0``.

Both are Banach-Picard iterations of a contractive operator; the closed-form
per-step factors and the Douglas-Rachford trajectory prefactor are exposed as
:class:`RateEstimate` values.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels


class Method(enum.Enum):
    """Splitting method selector."""

    FORWARD_BACKWARD = "ForwardBackward"
    DOUGLAS_RACHFORD = "DouglasRachford"

    @classmethod
    def parse(cls, name):
        aliases = {
            "forwardbackward": cls.FORWARD_BACKWARD,
            "forward_backward": cls.FORWARD_BACKWARD,
            "fb": cls.FORWARD_BACKWARD,
            "fbs": cls.FORWARD_BACKWARD,
            "douglasrachford": cls.DOUGLAS_RACHFORD,
            "douglas_rachford": cls.DOUGLAS_RACHFORD,
            "dr": cls.DOUGLAS_RACHFORD,
            "drs": cls.DOUGLAS_RACHFORD,
        }
        key = str(name).replace("-", "").lower()
        if key not in aliases:
            raise ValueError(f"unknown splitting method {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class SplitConfig:
    """Splitting method plus step size ``rho``.

    The forward-backward bound ``rho < 2/L`` is checked at application time,
    when the target cost (and hence ``L``) is known.
    """

    method: Method
    rho: float

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError(f"step size rho must be positive, got {self.rho}")


@dataclass(frozen=True)
class SplitState:
    """Iterate container passed through splitting steps.

    ``x`` is the primal iterate. For Douglas-Rachford, ``z`` is the auxiliary
    variable after the step and ``y`` is the feasible point produced by the
    nonsmooth prox (the natural point to record when ``g`` is an indicator).
    """

    x: np.ndarray
    z: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RateEstimate:
    """Per-step contraction factor and trajectory-bound prefactor.

    ``zeta`` contracts the distance to the fixed point once per step; the
    prefactor multiplies the whole trajectory bound (1 for forward-backward,
    ``(1 + rho L)/(1 + rho m) >= 1`` for Douglas-Rachford).
    """

    zeta: float
    prefactor: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.zeta <= 1.0):
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        if self.prefactor < 1.0:
            raise ValueError(f"prefactor must be >= 1, got {self.prefactor}")

    def power(self, k):
        """k-step factor ``zeta**k * prefactor`` (k = 0 gives the prefactor)."""
        if k < 0:
            raise ValueError(f"step count must be >= 0, got {k}")
        return self.zeta ** k * self.prefactor


def contraction_fb(rho, m, L):
    """Forward-backward contraction factor ``max(|1 - rho m|, |1 - rho L|)``."""
    _check_curvature_pair(m, L)
    if not (0.0 < rho < 2.0 / L):
        raise ValueError(f"forward-backward needs 0 < rho < 2/L = {2.0 / L:.6g}, got {rho}")
    zeta = max(abs(1.0 - rho * m), abs(1.0 - rho * L))
    return RateEstimate(zeta=zeta, prefactor=1.0)


def contraction_dr(rho, m, L):
    """Douglas-Rachford factor ``max(1/(1+rho m), rho L/(1+rho L))`` plus prefactor."""
    _check_curvature_pair(m, L)
    if rho <= 0.0:
        raise ValueError(f"Douglas-Rachford needs rho > 0, got {rho}")
    zeta = max(1.0 / (1.0 + rho * m), rho * L / (1.0 + rho * L))
    prefactor = (1.0 + rho * L) / (1.0 + rho * m)
    return RateEstimate(zeta=zeta, prefactor=prefactor)


def balanced_step(method, m, L):
    """Step size equalizing the two branches of the method's rate.

    Forward-backward: ``2/(m + L)``. Douglas-Rachford: ``1/sqrt(m L)``.
    """
    _check_curvature_pair(m, L)
    method = Method.parse(method) if not isinstance(method, Method) else method
    if method is Method.FORWARD_BACKWARD:
        return 2.0 / (m + L)
    return 1.0 / math.sqrt(m * L)


def _check_curvature_pair(m, L):
    if not (0.0 < m <= L):
        raise ValueError(f"curvature bounds must satisfy 0 < m <= L, got m={m}, L={L}")


def fb_step(x, smooth, nonsmooth, rho, t=0.0):
    """One forward-backward step on ``smooth`` frozen at time ``t``."""
    if not (0.0 < rho < 2.0 / smooth.L):
        raise ValueError(
            f"forward-backward needs 0 < rho < 2/L = {2.0 / smooth.L:.6g}, got {rho}"
        )
    return nonsmooth.prox(x - rho * smooth.grad(x, t), rho)


def dr_step(state, smooth, nonsmooth, rho, t=0.0):
    """One Douglas-Rachford step on ``smooth`` frozen at time ``t``.

    The auxiliary variable is taken from ``state.z`` and initialized to
    ``state.x`` when absent. The returned state carries the primal point
    computed from the incoming auxiliary variable, the feasible point ``y``,
    and the updated auxiliary variable.
    """
    if rho <= 0.0:
        raise ValueError(f"Douglas-Rachford needs rho > 0, got {rho}")
    if smooth.exact_prox is None:
        raise ValueError(
            "Douglas-Rachford needs an exact proximal map of the smooth part; "
            "supply exact_prox (quadratic costs provide one) or switch to "
            "forward-backward"
        )
    z = state.z if state.z is not None else state.x
    x = smooth.exact_prox(z, t, rho)
    y = nonsmooth.prox(2.0 * x - z, rho)
    return SplitState(x=x, z=z + y - x, y=y)


def banach_picard(initial, smooth, nonsmooth, config, steps, t=0.0):
    """Apply the configured splitting ``steps`` times from ``initial``.

    Dispatches to the compiled kernels when the smooth part is quadratic and
    the nonsmooth part carries a kernel tag; otherwise runs the generic
    Python loop. ``steps = 0`` returns the initial state unchanged.
    """
    if steps < 0:
        raise ValueError(f"step count must be >= 0, got {steps}")
    if steps == 0:
        return initial
    rho = config.rho
    spec = kernels.unpack_kernel(getattr(nonsmooth, "kernel", None), rho)
    fast = spec is not None and hasattr(smooth, "Q") and hasattr(smooth, "q")
    if config.method is Method.FORWARD_BACKWARD:
        if not (0.0 < rho < 2.0 / smooth.L):
            raise ValueError(
                f"forward-backward needs 0 < rho < 2/L = {2.0 / smooth.L:.6g}, got {rho}"
            )
        if fast:
            kind, thr, P, r = spec
            G = np.eye(smooth.Q.shape[0]) - rho * smooth.Q
            c = -rho * smooth.q
            return SplitState(x=kernels.fb_final(G, c, initial.x, steps, kind, thr, P, r))
        x = initial.x
        for _ in range(steps):
            x = fb_step(x, smooth, nonsmooth, rho, t)
        return SplitState(x=x)
    if smooth.exact_prox is None:
        raise ValueError(
            "Douglas-Rachford needs an exact proximal map of the smooth part; "
            "supply exact_prox (quadratic costs provide one) or switch to "
            "forward-backward"
        )
    z0 = initial.z if initial.z is not None else initial.x
    if fast:
        kind, thr, P, r = spec
        n = smooth.Q.shape[0]
        fac = cho_factor(np.eye(n) + rho * smooth.Q, lower=True)
        S = cho_solve(fac, np.eye(n))
        s = -rho * (S @ smooth.q)
        x, y, z = kernels.dr_final(S, s, z0, steps, kind, thr, P, r)
        return SplitState(x=x, z=z, y=y)
    state = SplitState(x=initial.x, z=z0)
    for _ in range(steps):
        state = dr_step(state, smooth, nonsmooth, rho, t)
    return state


def fixed_point_residual(state, smooth, nonsmooth, config, t=0.0):
    """Distance moved by one more application of the configured operator.

    Zero exactly at a fixed point, hence a practical optimality certificate:
    for forward-backward it is ``||x - prox_{rho g}(x - rho grad f(x))||``,
    for Douglas-Rachford ``||z' - z|| = ||y - x||`` from one extra step.
    """
    if config.method is Method.FORWARD_BACKWARD:
        return float(np.linalg.norm(state.x - fb_step(state.x, smooth, nonsmooth, config.rho, t)))
    nxt = dr_step(state, smooth, nonsmooth, config.rho, t)
    return float(np.linalg.norm(nxt.z - (state.z if state.z is not None else state.x)))
