"""Online prediction-correction loop.

At each sampling instant t_k the solver builds a quadratic model of the cost
expected at t_{k+1} by expanding the gradient around the current iterate
(first order in x and in t), runs P splitting steps against that model, then
observes the true cost at t_{k+1} and runs C splitting steps against it. The
time derivative of the gradient comes either from an analytic oracle or from
a first-order backward difference of observed gradients, whose error is
O(Ts^2).
"""

import enum
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .costs import QuadraticCost
from .splitting import Method, SplitConfig, SplitState, banach_picard, fixed_point_residual


class DerivativeMode(enum.Enum):
    """Source of the gradient's time derivative in the prediction model."""

    ANALYTIC = "Analytic"
    BACKWARD_DIFFERENCE = "BackwardDifference"

    @classmethod
    def parse(cls, name):
        aliases = {
            "analytic": cls.ANALYTIC,
            "backwarddifference": cls.BACKWARD_DIFFERENCE,
            "backward_difference": cls.BACKWARD_DIFFERENCE,
            "bdiff": cls.BACKWARD_DIFFERENCE,
        }
        key = str(name).replace("-", "").lower()
        if key not in aliases:
            raise ValueError(f"unknown derivative mode {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class PCConfig:
    """Prediction-correction configuration.

    ``P`` prediction steps (0 disables prediction, the iterate passes through
    unchanged), ``C >= 1`` correction steps, sampling period ``Ts`` in
    seconds, a derivative mode, and the shared splitting configuration. The
    step size is common to both phases by design; no per-phase override
    exists.
    """

    P: int
    C: int
    Ts: float
    derivative_mode: DerivativeMode
    split: SplitConfig

    def __post_init__(self):
        if self.P < 0:
            raise ValueError(f"prediction horizon P must be >= 0, got {self.P}")
        if self.C < 1:
            raise ValueError(f"correction horizon C must be >= 1, got {self.C}")
        if self.Ts <= 0.0:
            raise ValueError(f"sampling period Ts must be positive, got {self.Ts}")


@dataclass
class OnlineState:
    """Mutable per-run state of the online loop.

    ``prev_grad`` caches the previous cost's gradient evaluated at the
    current iterate, which is what the backward difference needs from step 1
    onward. ``warm_z`` stores the last Douglas-Rachford auxiliary variable
    for inspection; phases always restart it from their primal initial point.
    """

    k: int
    x: np.ndarray
    prev_grad: Optional[np.ndarray] = None
    warm_z: Optional[np.ndarray] = None


@dataclass(frozen=True)
class StepRecord:
    """One online step: time, prediction, correction, and phase residuals.

    Residuals are fixed-point residuals of the phase operator at the phase
    output, and 0.0 for a phase that ran zero steps.
    """

    t: float
    x_pred: np.ndarray
    x_corr: np.ndarray
    pred_residual: float
    corr_residual: float


class SolverError(RuntimeError):
    """Raised when an online run aborts; carries the failing step index."""

    def __init__(self, step, message):
        super().__init__(f"online step {step}: {message}")
        self.step = step


def backward_difference_grad_time(grad_now, grad_prev, Ts):
    """First-order backward difference of the gradient in time.

    Both gradients must be evaluated at the same point, at two consecutive
    sampling instants Ts apart.
    """
    if Ts <= 0.0:
        raise ValueError(f"sampling period Ts must be positive, got {Ts}")
    return (np.asarray(grad_now, dtype=float) - np.asarray(grad_prev, dtype=float)) / Ts


def build_prediction_cost(f, x_k, t_k, Ts, mode, time_derivative=None):
    """Quadratic model of the cost expected one sampling period ahead.

    The model's gradient is
    ``grad f(x_k; t_k) + hess f(x_k; t_k) (x - x_k) + Ts * d/dt grad f(x_k; t_k)``.
    Its Hessian is exactly the cost's Hessian at the expansion point, so the
    declared curvature bounds carry over unchanged.

    ``time_derivative`` overrides the time-derivative vector when given; in
    backward-difference mode it is required (produce it with
    :func:`backward_difference_grad_time`, or pass zeros when no history
    exists yet).
    """
    x_k = np.asarray(x_k, dtype=float)
    H = np.asarray(f.hessian(x_k, t_k), dtype=float)
    gnow = np.asarray(f.grad(x_k, t_k), dtype=float)
    if time_derivative is not None:
        dv = np.asarray(time_derivative, dtype=float)
    elif mode is DerivativeMode.ANALYTIC:
        if f.grad_time is None:
            raise ValueError(
                "analytic prediction needs grad_time on the smooth cost; "
                "supply it or switch to backward-difference mode"
            )
        dv = np.asarray(f.grad_time(x_k, t_k), dtype=float)
    else:
        raise ValueError(
            "backward-difference prediction needs an explicit time_derivative "
            "vector; build it with backward_difference_grad_time"
        )
    q = gnow - H @ x_k + Ts * dv
    return QuadraticCost(H, q, m=f.m, L=f.L)


def run_phase(x_init, smooth, nonsmooth, split, steps, t=0.0):
    """Run one splitting phase and report its output point and residual.

    Returns ``(point, residual)`` where the point is the primal iterate for
    forward-backward and the feasible prox point for Douglas-Rachford, and
    the residual is the phase operator's fixed-point residual at the output
    (0.0 when ``steps`` is 0).
    """
    x_init = np.asarray(x_init, dtype=float)
    if steps == 0:
        return x_init.copy(), 0.0
    state = banach_picard(SplitState(x=x_init), smooth, nonsmooth, split, steps, t)
    residual = fixed_point_residual(state, smooth, nonsmooth, split, t)
    if split.method is Method.DOUGLAS_RACHFORD and state.y is not None:
        return state.y, residual
    return state.x, residual


def _prediction_derivative(state, f, cfg, t_k):
    """Resolve the time-derivative vector for the prediction model."""
    if cfg.derivative_mode is DerivativeMode.ANALYTIC:
        return None  # build_prediction_cost reads f.grad_time
    if state.prev_grad is None:
        if state.k == 0:
            return np.zeros_like(state.x)  # no history yet, pure tangent model
        raise ValueError(
            f"backward-difference mode at step {state.k} without a cached "
            "previous gradient"
        )
    grad_now = np.asarray(f.grad(state.x, t_k), dtype=float)
    return backward_difference_grad_time(grad_now, state.prev_grad, cfg.Ts)


def predict(state, f, g, cfg, t_k):
    """P splitting steps against the one-step-ahead model, from ``state.x``.

    Returns the predicted iterate; with ``P = 0`` that is ``state.x`` itself.
    """
    x_pred, _ = _predict_phase(state, f, g, cfg, t_k)
    return x_pred


def _predict_phase(state, f, g, cfg, t_k):
    if cfg.P == 0:
        return np.array(state.x, dtype=float, copy=True), 0.0
    dv = _prediction_derivative(state, f, cfg, t_k)
    h = build_prediction_cost(f, state.x, t_k, cfg.Ts, cfg.derivative_mode, time_derivative=dv)
    return run_phase(state.x, h, g, cfg.split, cfg.P, t=0.0)


def correct(x_pred, f, g, cfg, t_next):
    """C splitting steps against the observed cost at ``t_next``."""
    x_corr, _ = run_phase(x_pred, f, g, cfg.split, cfg.C, t=t_next)
    return x_corr


def run_online(f, g, x0, t0, horizon_steps, cfg):
    """Drive the full prediction-correction loop for ``horizon_steps`` steps.

    Deterministic given its inputs. Any failure inside a step is re-raised
    as :class:`SolverError` carrying the step index.
    """
    if horizon_steps < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon_steps}")
    state = OnlineState(k=0, x=np.asarray(x0, dtype=float))
    records: List[StepRecord] = []
    for k in range(horizon_steps):
        t_k = t0 + k * cfg.Ts
        t_next = t_k + cfg.Ts
        try:
            x_pred, pred_res = _predict_phase(state, f, g, cfg, t_k)
            x_corr, corr_res = run_phase(x_pred, f, g, cfg.split, cfg.C, t=t_next)
            if not np.all(np.isfinite(x_corr)):
                raise ValueError("iterate diverged to a non-finite value")
        except SolverError:
            raise
        except Exception as exc:
            raise SolverError(k, str(exc)) from exc
        records.append(StepRecord(t=t_next, x_pred=x_pred, x_corr=x_corr,
                                  pred_residual=pred_res, corr_residual=corr_res))
        if cfg.derivative_mode is DerivativeMode.BACKWARD_DIFFERENCE:
            state.prev_grad = np.asarray(f.grad(x_corr, t_k), dtype=float)
        state.k = k + 1
        state.x = x_corr
    return records
