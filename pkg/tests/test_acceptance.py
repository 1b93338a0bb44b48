"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line (visible under ``pytest -s``) and then
asserts, so the suite both reports and gates. Tolerances are stated inline
next to each check.
"""

import json

import numpy as np
import pytest

from tvsplit import kernels
from tvsplit.analysis import (
    eta_linear,
    eta_quadratic,
    sinusoid_tracking_problem,
    solution_map_lipschitz_test,
    tracking_condition,
)
from tvsplit.benchmark import FormationSpec, NoiseRule, run_benchmark, sweep_ts
from tvsplit.cli import cmd_run, cmd_sweep
from tvsplit.costs import SmoothCost, build_quadratic, l1_cost, zero_cost
from tvsplit.engine import DerivativeMode, PCConfig, run_online
from tvsplit.splitting import (
    Method,
    SplitConfig,
    SplitState,
    balanced_step,
    contraction_dr,
    contraction_fb,
    dr_step,
    fb_step,
)


def _report(num, label, ok):
    print(f"ACCEPTANCE {num:02d} {label}: {'PASS' if ok else 'FAIL'}")
    return ok


def _pc(P, C, Ts=0.1, method=Method.FORWARD_BACKWARD, rho=1.0 / 16.0,
        mode=DerivativeMode.ANALYTIC):
    return PCConfig(P=P, C=C, Ts=Ts, derivative_mode=mode,
                    split=SplitConfig(method=method, rho=rho))


# ---------------------------------------------------------------------------
# shared random quadratic + l1 instances (criteria 4 and 5)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def quadratic_l1_instances():
    """100 random 6-dimensional quadratic + weighted-l1 instances.

    Eigenvalues drawn in [0.05, 1]; each instance carries a random admissible
    forward-backward step and a minimizer from a 10^4-iteration solver run
    (contraction factor at most 0.975, so the tail is far below 1e-12).
    """
    rng = np.random.default_rng(42)
    instances = []
    for _ in range(100):
        eigs = rng.uniform(0.05, 1.0, size=6)
        V, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        Q = (V * eigs) @ V.T
        Q = 0.5 * (Q + Q.T)
        q = rng.standard_normal(6)
        weight = rng.uniform(0.1, 1.0)
        f = build_quadratic(Q, q)
        g = l1_cost(weight)
        rho = rng.uniform(0.5, 1.9) / f.L
        x0 = 2.0 * rng.standard_normal(6)
        G = np.eye(6) - rho * Q
        star = kernels.fb_final(G, -rho * q, np.zeros(6), 10_000, 1, rho * weight)
        instances.append((f, g, weight, rho, x0, star))
    return instances


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_01_sampling_period_slopes():
    """Asymptotic error scales like Ts without prediction and like Ts^2
    with three analytic prediction steps, under noise sigma = 0.01 Ts."""
    spec = FormationSpec(seed=0)
    rho = balanced_step(Method.FORWARD_BACKWARD, *spec.curvature)
    ts_values = [0.05, 0.1, 0.2, 0.4]
    res_c = sweep_ts(spec, _pc(P=0, C=3, rho=rho), ts_values,
                     noise_rule=NoiseRule.SCALED_BY_TS, duration=100.0)
    res_pc = sweep_ts(spec, _pc(P=3, C=3, rho=rho), ts_values,
                      noise_rule=NoiseRule.SCALED_BY_TS, duration=100.0)
    ok = (res_c.slope is not None and 0.7 <= res_c.slope <= 1.3
          and res_pc.slope is not None and 1.6 <= res_pc.slope <= 2.4)
    assert _report(1, "sampling-period slopes 1 and 2", ok), (
        f"slopes: correction-only {res_c.slope}, predicted {res_pc.slope}")


def test_02_prediction_improves_accuracy():
    """One prediction step does not hurt the asymptotic tracking error."""
    spec = FormationSpec(seed=0)
    base = run_benchmark(spec, _pc(P=0, C=5), 100.0).asymptotic_error
    pred = run_benchmark(spec, _pc(P=1, C=5), 100.0).asymptotic_error
    ok = pred <= base
    assert _report(2, "prediction improves accuracy", ok), (
        f"P=1 error {pred:.3e} vs P=0 error {base:.3e}")


def test_03_fb_vs_dr_benchmark_ordering():
    """Both splittings stay bounded; forward-backward tracks at least as
    tightly as Douglas-Rachford with rho = 0.08 on the fixed seed."""
    spec = FormationSpec(seed=0)
    duration = 100.0
    fb = run_benchmark(spec, _pc(P=0, C=5, rho=1.0 / 16.0), duration)
    dr = run_benchmark(
        spec, _pc(P=0, C=5, method=Method.DOUGLAS_RACHFORD, rho=0.08), duration)
    bounded = True
    medians = []
    for rec in (fb, dr):
        bounded &= bool(rec.errors.max() <= 10.0 * (rec.errors[0] + 1.0))
        tail = rec.errors[rec.times > 2.0 * duration / 3.0]
        medians.append(float(np.median(tail)))
    ok = bounded and medians[0] <= medians[1]
    assert _report(3, "FB bounded and at or below DR", ok), (
        f"bounded={bounded}, median tail FB {medians[0]:.3e}, DR {medians[1]:.3e}")


def test_04_fb_per_iteration_contraction(quadratic_l1_instances):
    """Every forward-backward iteration contracts the distance to the
    minimizer by the closed-form factor, within 1e-12."""
    worst = -np.inf
    for f, g, _, rho, x0, star in quadratic_l1_instances:
        zeta = contraction_fb(rho, f.m, f.L).zeta
        x = x0
        for _ in range(60):
            x_next = fb_step(x, f, g, rho)
            gap = np.linalg.norm(x_next - star) - (
                zeta * np.linalg.norm(x - star) + 1e-12)
            worst = max(worst, float(gap))
            x = x_next
    ok = worst <= 0.0
    assert _report(4, "FB per-iteration contraction", ok), (
        f"worst bound violation {worst:.3e}")


def test_05_dr_trajectory_bound(quadratic_l1_instances):
    """With the auxiliary variable started at x0 + rho grad f(x0), the
    Douglas-Rachford primal sequence obeys the geometric trajectory bound
    zeta^k (1 + rho L)/(1 + rho m) ||x(0) - x*||, within 1e-10."""
    worst = -np.inf
    for f, g, _, _, x0, star in quadratic_l1_instances:
        rho = balanced_step(Method.DOUGLAS_RACHFORD, f.m, f.L)
        rate = contraction_dr(rho, f.m, f.L)
        state = SplitState(x=x0, z=x0 + rho * f.grad(x0))
        xs = []
        for _ in range(201):
            state = dr_step(state, f, g, rho)
            xs.append(state.x)
        base = np.linalg.norm(xs[0] - star)
        for k, xk in enumerate(xs):
            gap = np.linalg.norm(xk - star) - (rate.power(k) * base + 1e-10)
            worst = max(worst, float(gap))
    ok = worst <= 0.0
    assert _report(5, "DR trajectory bound", ok), (
        f"worst bound violation {worst:.3e}")


def test_06_solution_map_lipschitz():
    """The tilted-solution map is 1/m-Lipschitz on 20 instances with 55
    random tilt pairs each (tolerance 1e-6 on the ratio)."""
    rng = np.random.default_rng(7)
    ok = True
    worst = 0.0
    for _ in range(20):
        eigs = rng.uniform(0.05, 1.0, size=6)
        V, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        Q = (V * eigs) @ V.T
        f = build_quadratic(0.5 * (Q + Q.T), rng.standard_normal(6))
        g = l1_cost(rng.uniform(0.1, 1.0))
        tilts = [rng.standard_normal(6) for _ in range(11)]
        report = solution_map_lipschitz_test(f, g, tilts)
        ok &= report.holds and not report.inconclusive
        ok &= report.pairs_checked >= 50
        worst = max(worst, report.max_ratio - 1.0 / f.m)
    assert _report(6, "solution map 1/m-Lipschitz", ok), (
        f"worst ratio excess over 1/m: {worst:.3e}")


def test_07_eta_recursion_envelope():
    """Observed errors on the sinusoid tracker obey the one-step recursion
    e+ <= eta2 e^2 + eta1 e + eta0 + 1e-9 in both regimes, for two
    configurations whose tracking-condition value is below 1."""
    problem = sinusoid_tracking_problem()
    rho, Ts, steps = 0.5, 0.1, 120
    rate = contraction_fb(rho, 1.0, 1.0)
    x0 = 2.0 * np.ones(problem.n)
    ok = True
    worst = -np.inf
    for P in (0, 2):
        zetaP, zetaC = rate.power(P), rate.power(3)
        _, holds = tracking_condition(zetaP, zetaC, 1.0, 1.0)
        ok &= holds
        records = run_online(problem.smooth, zero_cost(), x0, 0.0, steps,
                             _pc(P=P, C=3, Ts=Ts, rho=rho))
        errors = [float(np.linalg.norm(x0 - problem.optimum(0.0)))]
        errors += [float(np.linalg.norm(r.x_corr - problem.optimum(r.t)))
                   for r in records]
        lin = eta_linear(zetaP, zetaC, 1.0, 1.0, problem.bounds.C0, Ts)
        quad = eta_quadratic(zetaP, zetaC, 1.0, problem.bounds, Ts)
        for etas in (lin, quad):
            for k in range(len(errors) - 1):
                e = errors[k]
                gap = errors[k + 1] - (
                    etas.eta2 * e * e + etas.eta1 * e + etas.eta0 + 1e-9)
                worst = max(worst, gap)
                ok &= gap <= 0.0
    assert _report(7, "eta recursion envelope", ok), (
        f"worst envelope violation {worst:.3e}")


def test_08_optimal_trajectory_drift():
    """Consecutive optima move by at most C0 Ts / m + 1e-12."""
    problem = sinusoid_tracking_problem()
    Ts = 0.1
    bound = problem.bounds.C0 * Ts / 1.0 + 1e-12
    drifts = [
        float(np.linalg.norm(problem.optimum((k + 1) * Ts)
                             - problem.optimum(k * Ts)))
        for k in range(1000)
    ]
    ok = max(drifts) <= bound
    assert _report(8, "optimal trajectory drift bound", ok), (
        f"max drift {max(drifts):.6e} vs bound {bound:.6e}")


def test_09_taylor_prediction_exactness():
    """On a constant-Hessian linearly drifting cost, one predicted step with
    rho = 1/L lands on the next optimum to 1e-10: for every step in analytic
    mode, and from the second step on under backward differences."""
    n = 4
    rng = np.random.default_rng(11)
    b0, bv = rng.standard_normal(n), rng.standard_normal(n)
    eye = np.eye(n)

    def target(t):
        return b0 + t * bv

    f = SmoothCost(
        grad=lambda x, t: x - target(t),
        hessian=lambda x, t: eye,
        m=1.0,
        L=1.0,
        grad_time=lambda x, t: -bv,
        exact_prox=lambda v, t, rho: (v + rho * target(t)) / (1.0 + rho),
    )
    ok = True
    worst = 0.0
    for mode, skip in ((DerivativeMode.ANALYTIC, 0),
                       (DerivativeMode.BACKWARD_DIFFERENCE, 1)):
        records = run_online(f, zero_cost(), np.zeros(n), 0.0, 50,
                             _pc(P=1, C=1, rho=1.0, mode=mode))
        for rec in records[skip:]:
            err = float(np.linalg.norm(rec.x_pred - target(rec.t)))
            worst = max(worst, err)
            ok &= err <= 1e-10
    assert _report(9, "Taylor prediction exactness", ok), (
        f"worst prediction error {worst:.3e}")


def test_10_byte_identical_reruns(tmp_path):
    """The same config and seed produce byte-identical CSVs twice in a row,
    for both the run and sweep commands."""
    run_doc = {
        "problem": "Formation",
        "solver": {"method": "FB", "P": 1, "C": 3, "Ts": 0.1},
        "duration": 5.0,
        "seed": 3,
    }
    run_cfg = tmp_path / "run.json"
    run_cfg.write_text(json.dumps(run_doc), encoding="utf-8")
    ra, rb = tmp_path / "run_a.csv", tmp_path / "run_b.csv"
    ok = cmd_run(str(run_cfg), out=str(ra)) == 0
    ok &= cmd_run(str(run_cfg), out=str(rb)) == 0
    ok &= ra.read_bytes() == rb.read_bytes()

    sweep_doc = {
        "base": dict(run_doc, duration=4.0),
        "ts_values": [0.1, 0.2],
        "variants": [[0, 2, "Analytic"]],
    }
    sweep_cfg = tmp_path / "sweep.json"
    sweep_cfg.write_text(json.dumps(sweep_doc), encoding="utf-8")
    sa, sb = tmp_path / "sweep_a.csv", tmp_path / "sweep_b.csv"
    ok &= cmd_sweep(str(sweep_cfg), out=str(sa)) == 0
    ok &= cmd_sweep(str(sweep_cfg), out=str(sb)) == 0
    ok &= sa.read_bytes() == sb.read_bytes()
    assert _report(10, "byte-identical reruns", ok)
