"""Command-line front end.

Three subcommands, each driven by one JSON config file:

* ``run``: execute a single online run and write the per-step error CSV.
* ``sweep``: re-run the formation benchmark across sampling periods and
  solver variants, writing asymptotic errors and fitted log-log slopes.
* ``analyze``: evaluate contraction factors, the tracking condition, error
  recursion coefficients, and the sampling-period bounds for a configuration
  without running it.

Config keys mirror the constructor fields of the underlying types; unknown
keys are rejected so typos fail loudly instead of silently using defaults.
Floats are written with 17 significant digits so CSV output parses back
losslessly, files are UTF-8 with LF line endings, and reruns with the same
config and seed are byte-identical.

Exit codes: 0 success, 1 solver failure at runtime, 2 config error.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .analysis import convergence_report, sinusoid_tracking_problem
from .benchmark import (
    FormationSpec,
    LissajousSpec,
    NoiseRule,
    leader_acceleration,
    leader_velocity,
    run_benchmark,
    sweep_ts,
)
from .costs import DerivativeBounds, zero_cost
from .engine import DerivativeMode, PCConfig, SolverError, run_online
from .splitting import Method, SplitConfig, balanced_step, contraction_dr, contraction_fb


class ConfigError(Exception):
    """Invalid or unreadable configuration; maps to exit code 2."""


def _fmt(x):
    return format(float(x), ".17g")


_MODE_LABEL = {
    DerivativeMode.ANALYTIC: "Analytic",
    DerivativeMode.BACKWARD_DIFFERENCE: "BackwardDifference",
}

_METHOD_LABEL = {
    Method.FORWARD_BACKWARD: "ForwardBackward",
    Method.DOUGLAS_RACHFORD: "DouglasRachford",
}


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path} is not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}"
        ) from exc


def _as_object(doc, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(doc).__name__}")
    return doc


def _check_keys(obj, where, required=(), optional=()):
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s): {', '.join(unknown)}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ConfigError(f"{where}: missing required key(s): {', '.join(missing)}")


def _as_int(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}, got {value}")
    return value


def _as_float(value, where, positive=False, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    value = float(value)
    if positive and value <= 0.0:
        raise ConfigError(f"{where} must be positive, got {value}")
    if nonnegative and value < 0.0:
        raise ConfigError(f"{where} must be nonnegative, got {value}")
    return value


def _as_str(value, where):
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


def _parse_leader(obj):
    obj = _as_object(obj, "formation.leader")
    _check_keys(obj, "formation.leader", optional=("amplitude", "ratio", "period", "phase"))
    kwargs = {}
    if "amplitude" in obj:
        kwargs["amplitude"] = _as_float(obj["amplitude"], "formation.leader.amplitude")
    if "ratio" in obj:
        ratio = obj["ratio"]
        if (not isinstance(ratio, list) or len(ratio) != 2
                or any(isinstance(r, bool) or not isinstance(r, int) for r in ratio)):
            raise ConfigError("formation.leader.ratio must be a pair of integers")
        kwargs["ratio"] = tuple(ratio)
    if "period" in obj:
        kwargs["period"] = _as_float(obj["period"], "formation.leader.period", positive=True)
    if "phase" in obj:
        kwargs["phase"] = _as_float(obj["phase"], "formation.leader.phase")
    try:
        return LissajousSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"formation.leader: {exc}") from exc


def _parse_formation(obj, seed):
    obj = _as_object(obj, "formation")
    _check_keys(
        obj, "formation",
        optional=("N", "d", "lambda", "sigmas", "directions", "leader", "anchor"),
    )
    kwargs = {"seed": seed}
    if "N" in obj:
        kwargs["N"] = _as_int(obj["N"], "formation.N", minimum=1)
    if "d" in obj:
        kwargs["d"] = _as_float(obj["d"], "formation.d", positive=True)
    if "lambda" in obj:
        kwargs["lam"] = _as_float(obj["lambda"], "formation.lambda", positive=True)
    if "sigmas" in obj:
        sigmas = obj["sigmas"]
        if not isinstance(sigmas, list):
            raise ConfigError("formation.sigmas must be a list of numbers")
        kwargs["sigmas"] = tuple(
            _as_float(s, f"formation.sigmas[{i}]", nonnegative=True)
            for i, s in enumerate(sigmas)
        )
    if "directions" in obj:
        dirs = obj["directions"]
        if not isinstance(dirs, list) or any(
            not isinstance(v, list) or len(v) != 2 for v in dirs
        ):
            raise ConfigError("formation.directions must be a list of [a, b] pairs")
        kwargs["directions"] = tuple(
            (_as_float(v[0], f"formation.directions[{i}][0]"),
             _as_float(v[1], f"formation.directions[{i}][1]"))
            for i, v in enumerate(dirs)
        )
    if "leader" in obj:
        kwargs["leader"] = _parse_leader(obj["leader"])
    if "anchor" in obj:
        kwargs["anchor"] = _as_str(obj["anchor"], "formation.anchor")
    try:
        return FormationSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"formation: {exc}") from exc


def _parse_synthetic(obj):
    obj = _as_object(obj, "synthetic")
    _check_keys(obj, "synthetic", optional=("amplitude", "omega", "dimension"))
    amplitude = _as_float(obj.get("amplitude", 1.0), "synthetic.amplitude")
    omega = _as_float(obj.get("omega", 1.0), "synthetic.omega")
    dimension = _as_int(obj.get("dimension", 5), "synthetic.dimension", minimum=1)
    return amplitude, omega, dimension


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated single-run experiment description."""

    problem: str
    formation: Optional[FormationSpec]
    synthetic: Optional[Tuple[float, float, int]]
    pc: PCConfig
    duration: float
    seed: int
    output_path: Optional[str]

    @property
    def curvature(self):
        """Strong convexity and smoothness constants of the target cost."""
        if self.problem == "Formation":
            return self.formation.curvature
        return 1.0, 1.0


def _parse_solver(obj, m, L):
    obj = _as_object(obj, "solver")
    _check_keys(
        obj, "solver",
        required=("method", "P", "C", "Ts"),
        optional=("rho", "derivative_mode"),
    )
    try:
        method = Method.parse(_as_str(obj["method"], "solver.method"))
    except ValueError as exc:
        raise ConfigError(f"solver.method: {exc}") from exc
    rho_raw = obj.get("rho", "balanced")
    if isinstance(rho_raw, str):
        if rho_raw != "balanced":
            raise ConfigError(
                f"solver.rho must be a positive number or 'balanced', got {rho_raw!r}"
            )
        rho = balanced_step(method, m, L)
    else:
        rho = _as_float(rho_raw, "solver.rho", positive=True)
    if method is Method.FORWARD_BACKWARD and rho >= 2.0 / L:
        raise ConfigError(
            f"solver.rho = {rho} violates the forward-backward step bound "
            f"rho < 2/L = {2.0 / L} for this problem"
        )
    P = _as_int(obj["P"], "solver.P", minimum=0)
    C = _as_int(obj["C"], "solver.C")
    Ts = _as_float(obj["Ts"], "solver.Ts", positive=True)
    mode_name = obj.get("derivative_mode", "Analytic")
    try:
        mode = DerivativeMode.parse(_as_str(mode_name, "solver.derivative_mode"))
    except ValueError as exc:
        raise ConfigError(f"solver.derivative_mode: {exc}") from exc
    try:
        return PCConfig(P=P, C=C, Ts=Ts, derivative_mode=mode,
                        split=SplitConfig(method=method, rho=rho))
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def parse_experiment(doc, seed_override=None):
    """Validate one experiment document and resolve it into concrete specs.

    A string ``rho`` of ``"balanced"`` is resolved here, at construction
    time, from the target problem's declared curvature.
    """
    doc = _as_object(doc, "config")
    _check_keys(
        doc, "config",
        required=("problem", "solver", "duration", "seed"),
        optional=("formation", "synthetic", "output_path"),
    )
    problem = _as_str(doc["problem"], "problem")
    if problem not in ("Formation", "SyntheticSinusoid"):
        raise ConfigError(
            f"problem must be 'Formation' or 'SyntheticSinusoid', got {problem!r}"
        )
    seed = _as_int(doc["seed"], "seed", minimum=0)
    if seed_override is not None:
        seed = _as_int(seed_override, "--seed", minimum=0)
    duration = _as_float(doc["duration"], "duration", positive=True)
    output_path = None
    if "output_path" in doc:
        output_path = _as_str(doc["output_path"], "output_path")

    formation = None
    synthetic = None
    if problem == "Formation":
        if "synthetic" in doc:
            raise ConfigError("synthetic section given but problem is Formation")
        formation = _parse_formation(doc.get("formation", {}), seed)
        m, L = formation.curvature
    else:
        if "formation" in doc:
            raise ConfigError("formation section given but problem is SyntheticSinusoid")
        synthetic = _parse_synthetic(doc.get("synthetic", {}))
        m, L = 1.0, 1.0

    pc = _parse_solver(doc["solver"], m, L)
    if int(duration / pc.Ts + 1e-9) < 1:
        raise ConfigError(
            f"duration {duration} s holds no full sampling period Ts = {pc.Ts} s"
        )
    return ExperimentConfig(
        problem=problem, formation=formation, synthetic=synthetic,
        pc=pc, duration=duration, seed=seed, output_path=output_path,
    )


def _parse_variants(raw):
    if not isinstance(raw, list) or not raw:
        raise ConfigError("variants must be a nonempty list of [P, C, derivative_mode]")
    variants = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, list) or len(entry) != 3:
            raise ConfigError(f"variants[{i}] must be a [P, C, derivative_mode] triple")
        P = _as_int(entry[0], f"variants[{i}][0] (P)", minimum=0)
        C = _as_int(entry[1], f"variants[{i}][1] (C)", minimum=1)
        try:
            mode = DerivativeMode.parse(_as_str(entry[2], f"variants[{i}][2]"))
        except ValueError as exc:
            raise ConfigError(f"variants[{i}][2]: {exc}") from exc
        variants.append((P, C, mode))
    return variants


def parse_sweep(doc, seed_override=None):
    """Validate a sweep document: a base experiment plus the sweep axes."""
    doc = _as_object(doc, "sweep config")
    _check_keys(
        doc, "sweep config",
        required=("base", "ts_values", "variants"),
        optional=("noise_rule",),
    )
    base = parse_experiment(doc["base"], seed_override)
    if base.problem != "Formation":
        raise ConfigError("sweep supports the Formation problem only")
    raw_ts = doc["ts_values"]
    if not isinstance(raw_ts, list) or not raw_ts:
        raise ConfigError("ts_values must be a nonempty list of positive numbers")
    ts_values = [_as_float(v, f"ts_values[{i}]", positive=True) for i, v in enumerate(raw_ts)]
    try:
        noise_rule = NoiseRule.parse(doc.get("noise_rule", NoiseRule.SCALED_BY_TS))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    variants = _parse_variants(doc["variants"])
    return base, ts_values, noise_rule, variants


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _resolve_out(cfg_output_path, out_override):
    out = out_override if out_override is not None else cfg_output_path
    if out is None:
        raise ConfigError("no output path: set output_path in the config or pass --out")
    return out


def _run_rows(cfg):
    """Execute one run; return (rows, asymptotic_error) for the step CSV."""
    if cfg.problem == "Formation":
        rec = run_benchmark(cfg.formation, cfg.pc, cfg.duration)
        rows = [
            (k + 1, rec.times[k], rec.errors[k],
             rec.pred_residuals[k], rec.corr_residuals[k])
            for k in range(len(rec.times))
        ]
        return rows, rec.asymptotic_error
    amplitude, omega, dimension = cfg.synthetic
    problem = sinusoid_tracking_problem(amplitude, omega, dimension)
    steps = int(cfg.duration / cfg.pc.Ts + 1e-9)
    records = run_online(problem.smooth, zero_cost(), np.zeros(problem.n),
                         0.0, steps, cfg.pc)
    rows = []
    tail = []
    for k, rec in enumerate(records):
        err = float(np.linalg.norm(rec.x_corr - problem.optimum(rec.t)))
        rows.append((k + 1, rec.t, err, rec.pred_residual, rec.corr_residual))
        if rec.t > 2.0 * cfg.duration / 3.0:
            tail.append(err)
    return rows, max(tail) if tail else max(r[2] for r in rows)


def cmd_run(config_path, seed=None, out=None):
    """Run one experiment and write the per-step tracking-error CSV."""
    try:
        cfg = parse_experiment(_read_json(config_path), seed)
        out_path = _resolve_out(cfg.output_path, out)
        rows, asymptotic = _run_rows(cfg)
        lines = ["k,t,E,pred_residual,corr_residual"]
        lines.extend(
            f"{k},{_fmt(t)},{_fmt(e)},{_fmt(p)},{_fmt(c)}" for k, t, e, p, c in rows
        )
        lines.append(f"# asymptotic_error={_fmt(asymptotic)}")
        _write_lines(out_path, lines)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_sweep(config_path, seed=None, out=None):
    """Sweep sampling periods per solver variant and write the error table."""
    try:
        base, ts_values, noise_rule, variants = parse_sweep(_read_json(config_path), seed)
        out_path = _resolve_out(base.output_path, out)
        lines = ["variant,Ts,asymptotic_error,loglog_slope"]
        for P, C, mode in variants:
            label = f"P{P}-C{C}-{_MODE_LABEL[mode]}"
            pc = PCConfig(P=P, C=C, Ts=base.pc.Ts, derivative_mode=mode,
                          split=base.pc.split)
            result = sweep_ts(base.formation, pc, ts_values, noise_rule,
                              duration=base.duration)
            slope = result.slope if result.slope is not None else math.nan
            for Ts, err in zip(result.ts_values, result.asymptotic_errors):
                lines.append(f"{label},{_fmt(Ts)},{_fmt(err)},{_fmt(slope)}")
        _write_lines(out_path, lines)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 2
    return 0


def _formation_bounds(spec, Ts):
    """Derivative bounds of the noiseless formation model, sampled over a period.

    The instance Hessian is constant, so the third-derivative and mixed
    bounds vanish; the gradient's first and second time derivatives are
    periodic and their norms are maximized on a dense grid over one leader
    period. The regularizer anchor trails the current time by one sampling
    period, which only phase-shifts its contribution.
    """
    dirs = np.asarray(spec.directions)
    M = dirs.T @ dirs
    reps = spec.N + 1
    c0 = 0.0
    c3 = 0.0
    for t in np.linspace(0.0, spec.leader.period, 512, endpoint=False):
        dv = -spec.lam * np.tile(leader_velocity(spec.leader, t - Ts), reps)
        dv[0:2] -= M @ leader_velocity(spec.leader, t)
        ddv = -spec.lam * np.tile(leader_acceleration(spec.leader, t - Ts), reps)
        ddv[0:2] -= M @ leader_acceleration(spec.leader, t)
        c0 = max(c0, float(np.linalg.norm(dv)))
        c3 = max(c3, float(np.linalg.norm(ddv)))
    return DerivativeBounds(C0=c0, C1=0.0, C2=0.0, C3=c3)


def _opt(value):
    return "infeasible" if value is None else _fmt(value)


def _report_pairs(cfg, report, m, L, bounds):
    rho = cfg.pc.split.rho
    return [
        ("problem", cfg.problem),
        ("method", _METHOD_LABEL[cfg.pc.split.method]),
        ("rho", _fmt(rho)),
        ("P", str(cfg.pc.P)),
        ("C", str(cfg.pc.C)),
        ("Ts", _fmt(cfg.pc.Ts)),
        ("m", _fmt(m)),
        ("L", _fmt(L)),
        ("C0", _fmt(bounds.C0)),
        ("C1", _fmt(bounds.C1)),
        ("C2", _fmt(bounds.C2)),
        ("C3", _fmt(bounds.C3)),
        ("zeta_P", _fmt(report.zetaP)),
        ("zeta_C", _fmt(report.zetaC)),
        ("zeta_PC", _fmt(report.zetaPC)),
        ("condition_value", _fmt(report.condition_value)),
        ("condition_holds", "true" if report.condition_holds else "false"),
        ("tau", _opt(report.tau)),
        ("max_sampling_period", _opt(report.max_sampling_period)),
        ("convergence_radius", _opt(report.convergence_radius)),
        ("eta_linear_eta2", _fmt(report.eta_linear.eta2)),
        ("eta_linear_eta1", _fmt(report.eta_linear.eta1)),
        ("eta_linear_eta0", _fmt(report.eta_linear.eta0)),
        ("eta_quadratic_eta2", _fmt(report.eta_quadratic.eta2)),
        ("eta_quadratic_eta1", _fmt(report.eta_quadratic.eta1)),
        ("eta_quadratic_eta0", _fmt(report.eta_quadratic.eta0)),
        ("asymptote_estimate", _opt(report.asymptote_estimate)),
    ]


def cmd_analyze(config_path, seed=None, out=None):
    """Evaluate rates, conditions, and bounds for a configuration.

    Always prints the report; also writes it as key,value CSV rows when an
    output path is available. An infeasible sampling-period section (the
    composed contraction is too weak for any admissible tau) is reported as
    such and still exits 0: infeasibility is a finding, not a failure.
    """
    try:
        cfg = parse_experiment(_read_json(config_path), seed)
        m, L = cfg.curvature
        if cfg.problem == "Formation":
            bounds = _formation_bounds(cfg.formation, cfg.pc.Ts)
        else:
            amplitude, omega, dimension = cfg.synthetic
            bounds = sinusoid_tracking_problem(amplitude, omega, dimension).bounds
        rho = cfg.pc.split.rho
        if cfg.pc.split.method is Method.FORWARD_BACKWARD:
            rate = contraction_fb(rho, m, L)
        else:
            rate = contraction_dr(rho, m, L)
        report = convergence_report(rate, cfg.pc.P, cfg.pc.C, m, L, bounds, cfg.pc.Ts)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    pairs = _report_pairs(cfg, report, m, L, bounds)
    width = max(len(k) for k, _ in pairs)
    for key, value in pairs:
        print(f"{key:<{width}}  {value}")
    if report.tau is None:
        print("note: sampling-period section infeasible; "
              "the composed contraction admits no tau < 1")
    out_path = out if out is not None else cfg.output_path
    if out_path is not None:
        try:
            _write_lines(out_path, ["key,value"] + [f"{k},{v}" for k, v in pairs])
        except OSError as exc:
            print(f"output error: {exc}", file=sys.stderr)
            return 2
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tvsplit",
        description="Time-varying convex optimization runs, sweeps, and rate reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("run", "run one experiment and write the per-step error CSV"),
        ("sweep", "sweep sampling periods and write the asymptotic-error table"),
        ("analyze", "evaluate rates and error bounds without running"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("config", help="path to the JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed (nonnegative integer)")
        p.add_argument("--out", default=None,
                       help="override the config output_path")
    args = parser.parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "analyze": cmd_analyze}[args.command]
    return handler(args.config, seed=args.seed, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
