"""Declarative experiment runner and command-line interface.

An experiment is one JSON config: reaction term, measure or direct initial
data, grid/solver parameters, horizon, and a list of named checks.  The
pipeline computes profiles on demand, materializes the initial data, evolves
it with front tracking and snapshots, then executes each requested check and
emits traces, plot-ready columns, and a summary report.  Re-running a config
byte-reproduces every numeric output.

Subcommands: profile, simulate, verify, verify-all, list-checks.
Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dfield
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, measures, pde, profiles, steepness
from .errors import ConfigError, InvalidInput, KPPError, NumericError
from .nonlinearity import Nonlinearity, from_table, named

SCHEMA_VERSION = 1

_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "sqrt": np.sqrt, "tanh": np.tanh, "abs": np.abs, "pi": math.pi,
}


def _compile_expr(expr: str, variables: tuple, where: str):
    code = compile(expr, f"<{where}>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name not in variables:
            raise ConfigError(f"{where}: unknown name {name!r} in expression {expr!r}")

    def fn(**kw):
        out = eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, **kw})
        return out

    return fn


def _coeff_fn(expr: str, where: str):
    raw = _compile_expr(expr, ("t", "x"), where)

    def fn(t, x):
        out = np.asarray(raw(t=t, x=x), dtype=float)
        if out.ndim == 0:
            return np.full_like(np.asarray(x, dtype=float), float(out))
        return out

    return fn


# ---------------------------------------------------------------------------
# Configuration.
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Validated experiment description (see bundled configs for examples)."""

    name: str
    nonlinearity: object
    measure_spec: dict | None
    initial: dict | None
    coefficients: dict | None
    width: float
    dx: float
    dt: float
    window: str
    boundary: str
    margin: float
    t_start: float
    t_end: float
    settle_time: float
    observe_every: float
    snapshot_times: list
    n_list: list
    checks: list
    check_params: dict
    seed: int
    formats: list
    raw: dict = dfield(repr=False, default_factory=dict)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        def need(key, path="config"):
            if key not in doc:
                raise ConfigError(f"{path}.{key}: missing required field")
            return doc[key]

        if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"config.schema: expected {SCHEMA_VERSION}")
        grid = need("grid")
        horizon = need("horizon")
        for k in ("width", "dx"):
            if k not in grid:
                raise ConfigError(f"config.grid.{k}: missing required field")
        for k in ("t_start", "t_end"):
            if k not in horizon:
                raise ConfigError(f"config.horizon.{k}: missing required field")
        if not horizon["t_start"] < horizon["t_end"]:
            raise ConfigError("config.horizon: t_start must precede t_end")
        solver = doc.get("solver", {})
        dt = float(solver.get("dt", pde.default_dt(float(grid["dx"]))))
        t0, t1 = float(horizon["t_start"]), float(horizon["t_end"])
        settle = float(doc.get("settle_time", min(4.0, 0.1 * (t1 - t0))))
        observe = float(doc.get("observe_every", 0.25))
        snaps = doc.get("snapshot_times")
        if snaps is None:
            snaps = sorted(set(np.round(np.linspace(t0 + settle, t1, 9), 6))
                           | ({0.0} if t0 + settle < 0.0 < t1 else set()))
        checks = list(doc.get("checks", []))
        for cid in checks:
            if cid not in CHECKS:
                raise ConfigError(f"config.checks: unknown check id {cid!r}; "
                                  f"known: {sorted(CHECKS)}")
        measure_spec = doc.get("measure")
        initial = doc.get("initial")
        if measure_spec is None and initial is None:
            raise ConfigError("config: one of 'measure' or 'initial' is required")
        return ExperimentConfig(
            name=str(doc.get("name", "experiment")),
            nonlinearity=doc.get("nonlinearity", "logistic"),
            measure_spec=measure_spec,
            initial=initial,
            coefficients=doc.get("coefficients"),
            width=float(grid["width"]),
            dx=float(grid["dx"]),
            dt=dt,
            window=str(solver.get("window", "fixed")),
            boundary=str(solver.get("boundary",
                                    "envelope" if measure_spec else "hold")),
            margin=float(solver.get("margin", 40.0)),
            t_start=t0,
            t_end=t1,
            settle_time=settle,
            observe_every=observe,
            snapshot_times=[float(t) for t in snaps],
            n_list=[float(n) for n in doc.get("n_list", [])],
            checks=checks,
            check_params=dict(doc.get("check_params", {})),
            seed=int(doc.get("seed", 20240801)),
            formats=list(doc.get("formats", ["trace", "plots"])),
            raw=doc,
        )

    @staticmethod
    def load(path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key == "dx":
                doc.setdefault("grid", {})["dx"] = value
            elif key == "dt":
                doc.setdefault("solver", {})["dt"] = value
            elif key == "horizon":
                t0, _, t1 = value.partition(":")
                doc.setdefault("horizon", {})
                doc["horizon"]["t_start"] = float(t0)
                doc["horizon"]["t_end"] = float(t1)
        return ExperimentConfig.from_dict(doc)


def _build_nonlinearity(spec) -> Nonlinearity:
    if isinstance(spec, str):
        return named(spec)
    if isinstance(spec, dict) and "table" in spec:
        rows = np.asarray(spec["table"], dtype=float)
        return from_table(rows[:, 0], rows[:, 1], float(spec["fprime0"]))
    if isinstance(spec, dict) and "table_path" in spec:
        rows = np.loadtxt(spec["table_path"])
        return from_table(rows[:, 0], rows[:, 1], float(spec["fprime0"]))
    raise ConfigError(f"config.nonlinearity: unrecognized spec {spec!r}")


# ---------------------------------------------------------------------------
# Run context.
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class RunContext:
    cfg: ExperimentConfig
    nl: Nonlinearity
    family: profiles.ProfileFamily
    mu: measures.SpeedMeasure | None
    co: pde.Coefficients
    solver_cfg: pde.SolverConfig
    trace: analysis.FrontTrace | None = None
    snapshots: list = dfield(default_factory=list)
    final: pde.Field | None = None
    base_grid: pde.Grid1D | None = None

    def snapshot_at(self, t: float) -> pde.Field:
        if not self.snapshots:
            raise InvalidInput("run produced no snapshots")
        times = np.array([f.time for f in self.snapshots])
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > max(1.0, 0.02 * (self.cfg.t_end - self.cfg.t_start)):
            raise InvalidInput(f"no snapshot near t = {t}; have {times}")
        return self.snapshots[i]

    def tracked_snapshots(self, delay: float | None = None):
        """Snapshots after the settle window (front fully developed)."""
        cut = self.cfg.t_start + (self.cfg.settle_time if delay is None else delay) - 1e-9
        return [f for f in self.snapshots if f.time >= cut]

    @property
    def support(self):
        if self.mu is None:
            raise InvalidInput("check requires a measure-driven run")
        return measures.support_info(self.mu)


def _initial_field(ctx: RunContext) -> pde.Field:
    cfg = ctx.cfg
    n_pts = int(round(cfg.width / cfg.dx)) + 1
    base = pde.Grid1D(-0.5 * cfg.width, cfg.dx, n_pts)
    if ctx.mu is not None:
        center = measures.scan_front_position(ctx.mu, -cfg.t_start, ctx.family)
        grid = measures.centered_grid(base, center)
        ctx.base_grid = grid
        return measures.initial_condition(ctx.mu, -cfg.t_start, grid, ctx.family)
    kind = ctx.cfg.initial.get("kind")
    if kind == "heaviside":
        pos = float(ctx.cfg.initial.get("position", 0.0))
        grid = measures.centered_grid(base, pos)
        vals = np.where(grid.x() < pos, 1.0, 0.0)
    elif kind == "profile":
        c = float(ctx.cfg.initial["c"])
        shift = float(ctx.cfg.initial.get("shift", 0.0))
        grid = measures.centered_grid(base, shift)
        vals = ctx.family.get(c).value(grid.x() - shift)
    else:
        raise ConfigError(f"config.initial.kind: unrecognized {kind!r}")
    ctx.base_grid = grid
    return pde.Field(grid, vals, cfg.t_start)


def _build_context(cfg: ExperimentConfig) -> RunContext:
    nl = _build_nonlinearity(cfg.nonlinearity)
    family = profiles.ProfileFamily(nl)
    mu = None
    if cfg.measure_spec is not None:
        mu = measures.measure_from_spec(cfg.measure_spec, nl.critical_speed)
    if cfg.coefficients:
        spec = cfg.coefficients
        a = _coeff_fn(str(spec.get("a", "1.0")), "coefficients.a")
        b = _coeff_fn(str(spec.get("b", "0.0")), "coefficients.b")
        reaction_spec = spec.get("reaction", "kpp")
        if reaction_spec == "kpp":
            def reaction(t, x, u):
                return nl.f(u)

            slope = nl.slope_bound()
        else:
            raw = _compile_expr(str(reaction_spec), ("t", "x", "u"), "coefficients.reaction")

            def reaction(t, x, u):
                out = np.asarray(raw(t=t, x=x, u=u), dtype=float)
                return np.full_like(u, float(out)) if out.ndim == 0 else out

            slope = _estimate_reaction_slope(reaction, cfg)
        co = pde.Coefficients.heterogeneous(a, b, reaction, slope)
    else:
        co = pde.Coefficients.kpp(nl)

    bc_left = bc_right = None
    if cfg.boundary in ("envelope", "envelope-right"):
        if mu is None:
            raise ConfigError(f"config.solver.boundary: {cfg.boundary!r} needs a measure")
        bc_left, bc_right = measures.boundary_clamps(mu, family)
        if cfg.boundary == "envelope-right":
            # For accelerating (unbounded-support) runs the lower envelope
            # goes slack behind the front; hold the trailing edge instead.
            bc_left = None
    elif cfg.boundary == "dirichlet":
        bc_left = lambda t, x: 1.0
        bc_right = lambda t, x: 0.0
    elif cfg.boundary != "hold":
        raise ConfigError(f"config.solver.boundary: unrecognized {cfg.boundary!r}")
    solver_cfg = pde.SolverConfig(dt=cfg.dt, boundary=cfg.boundary, window=cfg.window,
                                  margin=cfg.margin, bc_left=bc_left, bc_right=bc_right)
    return RunContext(cfg=cfg, nl=nl, family=family, mu=mu, co=co,
                      solver_cfg=solver_cfg)


def _estimate_reaction_slope(reaction, cfg: ExperimentConfig) -> float:
    us = np.linspace(0.0, 1.0, 41)
    worst = 0.0
    for t in np.linspace(cfg.t_start, cfg.t_end, 5):
        for x in np.linspace(-0.5 * cfg.width, 0.5 * cfg.width, 5):
            vals = np.asarray(reaction(t, np.full_like(us, x), us), dtype=float)
            worst = max(worst, float(np.max(np.abs(np.diff(vals) / np.diff(us)))))
    return worst


# ---------------------------------------------------------------------------
# Check registry.
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    check: str
    passed: bool
    details: dict


CHECKS: dict = {}


def register_check(cid: str, doc: str):
    def deco(fn):
        CHECKS[cid] = (fn, doc)
        return fn

    return deco


def _margin_mask(f: pde.Field, margin: float) -> np.ndarray:
    x = f.x()
    return (x >= x[0] + margin) & (x <= x[-1] - margin)


@register_check("transport", "single-atom run matches the translated profile")
def _check_transport(ctx: RunContext, params: dict) -> CheckResult:
    atoms = ctx.mu.supercritical_atoms() or ctx.mu.atoms
    if len(atoms) != 1:
        raise ConfigError("transport check needs a single-atom measure")
    c, m = atoms[0]
    tol = float(params.get("tol", 2e-3))
    margin = float(params.get("margin", 20.0))
    P = ctx.family.get(abs(c))
    worst = 0.0
    for f in ctx.tracked_snapshots():
        ref = P.value(np.sign(c) * f.x() - abs(c) * f.time - abs(c) * math.log(m))
        mask = _margin_mask(f, margin)
        worst = max(worst, float(np.max(np.abs(f.values - ref)[mask])))
    return CheckResult("transport", worst <= tol,
                       {"sup_error": worst, "tol": tol, "speed": c})


@register_check("global-speed", "global mean speed exists and matches the support point")
def _check_global_speed(ctx: RunContext, params: dict) -> CheckResult:
    expected = params.get("expected")
    if expected is None:
        expected = ctx.support.c_plus
    rtol = float(params.get("rtol", 0.02))
    est = analysis.speed_estimates(ctx.trace)
    ok = est.global_fit is not None and abs(est.global_fit.slope - expected) <= rtol * abs(expected)
    return CheckResult("global-speed", bool(ok), {
        "expected": expected,
        "global": None if est.global_fit is None else est.global_fit.slope,
        "past": est.past.slope, "future": est.future.slope, "rtol": rtol})


@register_check("past-future-speeds", "window-fitted speeds match the support endpoints")
def _check_past_future(ctx: RunContext, params: dict) -> CheckResult:
    rtol = float(params.get("rtol", 0.05))
    info = ctx.support
    est = analysis.speed_estimates(ctx.trace)
    ok_past = abs(est.past.slope - info.c_minus) <= rtol * abs(info.c_minus)
    ok_future = abs(est.future.slope - info.c_plus) <= rtol * abs(info.c_plus)
    return CheckResult("past-future-speeds", bool(ok_past and ok_future), {
        "past": est.past.slope, "expected_past": info.c_minus,
        "future": est.future.slope, "expected_future": info.c_plus, "rtol": rtol})


@register_check("speed-ordering", "past window speed never exceeds the future one")
def _check_speed_ordering(ctx: RunContext, params: dict) -> CheckResult:
    slack = float(params.get("slack", 0.05))
    est = analysis.speed_estimates(ctx.trace)
    ok = est.past.slope <= est.future.slope + slack
    return CheckResult("speed-ordering", bool(ok),
                       {"past": est.past.slope, "future": est.future.slope})


@register_check("spreading-floor", "no fitted level speed below the critical speed")
def _check_spreading_floor(ctx: RunContext, params: dict) -> CheckResult:
    slack = float(params.get("slack", 0.05))
    floor = ctx.nl.critical_speed - slack
    slopes = {}
    for m in sorted(ctx.trace.positions):
        est = analysis.speed_estimates(ctx.trace, m=m)
        slopes[m] = (est.past.slope, est.future.slope)
    worst = min(min(v) for v in slopes.values())
    return CheckResult("spreading-floor", bool(worst >= floor),
                       {"min_fitted_speed": worst, "floor": floor})


@register_check("sandwich", "fields stay between the lower and upper envelopes")
def _check_sandwich(ctx: RunContext, params: dict) -> CheckResult:
    tol = float(params.get("tol", 5e-3))
    worst = 0.0
    for f in ctx.tracked_snapshots():
        lo, up = measures.sandwich_bounds(ctx.mu, f.time, f.x(), ctx.family)
        worst = max(worst, float(np.max(lo - f.values)), float(np.max(f.values - up)))
    return CheckResult("sandwich", worst <= tol, {"max_violation": worst, "tol": tol})


def _anchor_levels(params: dict):
    return tuple(params.get("levels", (0.1, 0.3, 0.5, 0.7, 0.9)))


@register_check("steepness", "steeper than the fastest support profile, less steep than the slowest")
def _check_steepness(ctx: RunContext, params: dict) -> CheckResult:
    info = ctx.support
    levels = _anchor_levels(params)
    P_hi = ctx.family.get(float(params.get("gamma_high", info.c_plus)))
    P_lo = ctx.family.get(float(params.get("gamma_low", max(info.c_minus, ctx.nl.critical_speed))))
    worst = 0.0
    count = 0
    all_ok = True
    # The profile sandwich is exact for the limit object; skip the early
    # stretch where the finite-start approximation is still relaxing.
    for f in ctx.tracked_snapshots(delay=float(params.get("delay", 10.0))):
        anchors = steepness.anchors_at_levels(f, levels)
        r1 = steepness.steepness_check(
            f, P_hi, anchors, steepness.STEEPER,
            steepness.default_sandwich_tol(P_hi, f.grid.dx))
        r2 = steepness.steepness_check(
            f, P_lo, anchors, steepness.LESS_STEEP,
            steepness.default_sandwich_tol(P_lo, f.grid.dx))
        all_ok = all_ok and r1.passed and r2.passed and (r1.slope_ok is not False)
        worst = max(worst, r1.max_violation_left, r1.max_violation_right,
                    r2.max_violation_left, r2.max_violation_right)
        count += 1
    return CheckResult("steepness", bool(all_ok),
                       {"snapshots": count, "max_violation": worst, "levels": levels})


@register_check("critical-steepest", "no solution is steeper than the critical profile")
def _check_critical_steepest(ctx: RunContext, params: dict) -> CheckResult:
    levels = _anchor_levels(params)
    P = ctx.family.critical
    worst = 0.0
    all_ok = True
    for f in ctx.tracked_snapshots(delay=float(params.get("delay", 10.0))):
        anchors = steepness.anchors_at_levels(f, levels)
        r = steepness.critical_steepest_check(
            f, P, anchors, steepness.default_sandwich_tol(P, f.grid.dx))
        all_ok = all_ok and r.passed
        worst = max(worst, r.max_violation_left, r.max_violation_right)
    return CheckResult("critical-steepest", bool(all_ok), {"max_violation": worst})


@register_check("steepness-power", "a flatter profile checked as steeper must fail")
def _check_steepness_power(ctx: RunContext, params: dict) -> CheckResult:
    c_field = float(params.get("field_c", ctx.support.c_plus if ctx.mu else 4.0))
    c_ref = float(params.get("ref_c", ctx.nl.critical_speed))
    P_field = ctx.family.get(c_field)
    P_ref = ctx.family.get(c_ref)
    grid = pde.Grid1D(-40.0, ctx.cfg.dx, int(80.0 / ctx.cfg.dx) + 1)
    f = pde.Field(grid, P_field.value(grid.x()), 0.0)
    anchors = steepness.anchors_at_levels(f, _anchor_levels(params))
    r = steepness.steepness_check(f, P_ref, anchors, steepness.STEEPER,
                                  steepness.default_sandwich_tol(P_ref, grid.dx))
    return CheckResult("steepness-power", not r.passed,
                       {"violation_detected": max(r.max_violation_left,
                                                  r.max_violation_right)})


@register_check("tail-lambda", "right-tail decay rate recovers the fastest support speed")
def _check_tail_lambda(ctx: RunContext, params: dict) -> CheckResult:
    t_eval = float(params.get("time", 0.0))
    rtol = float(params.get("rtol", 0.05))
    f = ctx.snapshot_at(t_eval)
    td = analysis.tail_decay_rate(f, ctx.nl.fprime0,
                                  fit_levels=tuple(params.get("fit_levels", (1e-8, 1e-3))))
    lam_ref = profiles.decay_rate(ctx.support.c_plus, ctx.nl.fprime0)
    ok = (not td.out_of_range
          and abs(td.lam - lam_ref) <= rtol * lam_ref
          and abs(td.predicted_c_plus - ctx.support.c_plus) <= rtol * ctx.support.c_plus)
    return CheckResult("tail-lambda", bool(ok), {
        "lambda": td.lam, "expected_lambda": lam_ref,
        "predicted_c_plus": td.predicted_c_plus,
        "expected_c_plus": ctx.support.c_plus, "fit_residual": td.fit_residual})


@register_check("width-band", "interface width stays inside a constant band")
def _check_width_band(ctx: RunContext, params: dict) -> CheckResult:
    ratio_cap = float(params.get("ratio_cap", 1.5))
    t_lo = float(params.get("t_lo", 0.0))
    tr = ctx.trace.restricted(t_lo, ctx.cfg.t_end)
    w = tr.widths[tr.widths > 0]
    ratio = float(np.max(w) / np.min(w))
    # The residual width trend at finite horizons is reported, not judged;
    # boundedness is certified by the max/min band alone.
    verdict = analysis.is_transition_front(tr, *tr.width_levels)
    return CheckResult("width-band", bool(ratio <= ratio_cap), {
        "ratio": ratio, "cap": ratio_cap, "growth_slope": verdict.growth_slope})


@register_check("width-growth", "interface width grows without bound")
def _check_width_growth(ctx: RunContext, params: dict) -> CheckResult:
    factor = float(params.get("factor", 2.0))
    t_ref = float(params.get("t_ref", 0.0))
    tr = ctx.trace
    w_ref = float(np.interp(t_ref, tr.times, tr.widths))
    w_end = float(tr.widths[-1])
    verdict = analysis.is_transition_front(tr, *tr.width_levels)
    ok = w_end >= factor * w_ref and verdict.growth_slope > 0.0 and not verdict.verdict
    return CheckResult("width-growth", bool(ok), {
        "width_ref": w_ref, "width_end": w_end,
        "growth_slope": verdict.growth_slope})


@register_check("shift-dichotomy", "position shifts bounded exactly when the endpoint has an atom")
def _check_shift_dichotomy(ctx: RunContext, params: dict) -> CheckResult:
    bound = float(params.get("bound", 5.0))
    info = ctx.support
    cls = measures.classify(ctx.mu)
    tr = ctx.trace
    X = tr.position(0.5)
    details = {}
    ok = True
    for side, c_ref, has_atom in (("past", info.c_minus, cls.shift_bounded_past),
                                  ("future", info.c_plus, cls.shift_bounded_future)):
        mask = tr.times <= 0.0 if side == "past" else tr.times >= 0.0
        series = X[mask] - c_ref * tr.times[mask]
        series = series[np.isfinite(series)]
        rng = float(np.max(series) - np.min(series))
        inc = np.diff(series)
        frac_drift = float(np.mean(inc < 0)) if inc.size else 0.0
        details[side] = {"range": rng, "atom": has_atom, "drift_fraction": frac_drift}
        if has_atom:
            ok = ok and rng <= bound
        else:
            monotone = frac_drift >= 0.9 if side == "future" else frac_drift <= 0.1
            ok = ok and rng >= bound and monotone
    return CheckResult("shift-dichotomy", bool(ok), details)


@register_check("two-atom-shift", "late fields match the explicitly shifted fast profile")
def _check_two_atom_shift(ctx: RunContext, params: dict) -> CheckResult:
    atoms = sorted(ctx.mu.supercritical_atoms())
    if len(atoms) != 2:
        raise ConfigError("two-atom-shift needs exactly two supercritical atoms")
    (c_lo, m_lo), (c_hi, m_hi) = atoms
    tol = float(params.get("tol", 0.02))
    margin = float(params.get("margin", 15.0))
    lam = profiles.decay_rate(c_hi, ctx.nl.fprime0)
    P = ctx.family.get(c_hi)
    f = ctx.snapshot_at(float(params.get("time", ctx.cfg.t_end)))
    shift = (c_hi * f.time + (c_hi - 1.0 / lam) * math.log(m_lo + m_hi)
             + (1.0 / lam) * math.log(m_hi))
    mask = _margin_mask(f, margin)
    err = float(np.max(np.abs(f.values - P.value(f.x() - shift))[mask]))
    return CheckResult("two-atom-shift", err <= tol,
                       {"sup_error": err, "tol": tol, "shift": shift})


@register_check("profile-convergence", "late fields collapse onto the fast support profile")
def _check_profile_convergence(ctx: RunContext, params: dict) -> CheckResult:
    tol = float(params.get("tol", 0.02))
    margin = float(params.get("margin", 15.0))
    f = ctx.snapshot_at(float(params.get("time", ctx.cfg.t_end)))
    P = ctx.family.get(float(params.get("c", ctx.support.c_plus)))
    match = analysis.profile_convergence_error(f, P, exclude_margin=margin)
    return CheckResult("profile-convergence", match.error <= tol,
                       {"sup_error": match.error, "tol": tol, "shift": match.shift})


@register_check("critical-past-profile", "early fields track the critical profile at its drift")
def _check_critical_past(ctx: RunContext, params: dict) -> CheckResult:
    tol = float(params.get("tol", 0.05))
    t_eval = float(params.get("time", ctx.cfg.t_start + 10.0))
    mass = ctx.mu.mass_at_cstar
    if mass <= 0:
        raise ConfigError("critical-past-profile needs an atom at the critical speed")
    cstar = ctx.nl.critical_speed
    f = ctx.snapshot_at(t_eval)
    P = ctx.family.critical
    center = cstar * f.time + cstar * math.log(mass)
    x = f.x()
    window = float(params.get("window", 30.0))
    mask = (x >= center - window) & (x <= center + window)
    if mask.sum() < 16:
        raise InvalidInput("snapshot window does not cover the critical position")
    err = float(np.max(np.abs(f.values[mask] - P.value(x[mask] - center))))
    return CheckResult("critical-past-profile", err <= tol,
                       {"sup_error": err, "tol": tol, "time": f.time})


@register_check("monotone-ladder", "start-index ladder increases monotonically and converges")
def _check_monotone_ladder(ctx: RunContext, params: dict) -> CheckResult:
    n_list = [float(n) for n in params.get("n_list", ctx.cfg.n_list)] or [20.0, 40.0, 60.0]
    targets = [float(t) for t in params.get("targets", (-10.0, 0.0))]
    tol = float(params.get("monotone_tol", 1e-6))
    base = pde.Grid1D(-0.5 * ctx.cfg.width, ctx.cfg.dx,
                      int(round(ctx.cfg.width / ctx.cfg.dx)) + 1)
    cfg = pde.SolverConfig(dt=ctx.cfg.dt, boundary=ctx.cfg.boundary,
                           window="follow-half-level", margin=ctx.cfg.margin,
                           bc_left=ctx.solver_cfg.bc_left,
                           bc_right=ctx.solver_cfg.bc_right)
    report = measures.approximate_superposition(
        ctx.mu, n_list, targets, base, cfg, ctx.family, monotone_tol=tol)
    decreasing = all(b <= a * 1.05 for a, b in zip(report.sup_differences[:-1],
                                                   report.sup_differences[1:]))
    ok = report.monotone_ok and report.sandwich_ok and decreasing
    return CheckResult("monotone-ladder", bool(ok), {
        "min_increments": report.min_increments,
        "sup_differences": report.sup_differences,
        "sandwich_violation": report.sandwich_violation,
        "converged": report.converged})


@register_check("critical-atom-perturbation",
                "adding a vanishing critical atom perturbs by at most its own front")
def _check_critical_atom_perturbation(ctx: RunContext, params: dict) -> CheckResult:
    sigmas = [float(s) for s in params.get("sigmas", (0.1, 0.01))]
    tol = float(params.get("tol", 5e-3))
    n = float(params.get("n", 20.0))
    targets = [float(t) for t in params.get("targets", (-10.0, 0.0, 10.0))]
    if ctx.mu.mass_at_cstar > 0:
        raise ConfigError("perturbation check requires no atom at the critical speed")
    cstar = ctx.nl.critical_speed
    base = pde.Grid1D(-0.5 * ctx.cfg.width, ctx.cfg.dx,
                      int(round(ctx.cfg.width / ctx.cfg.dx)) + 1)
    grid = measures.centered_grid(base, measures.scan_front_position(ctx.mu, n, ctx.family))
    co = pde.Coefficients.kpp(ctx.nl)
    P = ctx.family.critical

    def run(mu):
        cfg = pde.SolverConfig(dt=ctx.cfg.dt, window="fixed",
                               bc_left=measures.boundary_clamps(mu, ctx.family)[0],
                               bc_right=measures.boundary_clamps(mu, ctx.family)[1])
        u0 = measures.initial_condition(mu, n, grid, ctx.family)
        snaps = pde.Observer(targets, lambda f: f.copy())
        res = pde.evolve(u0, co, cfg, targets[-1] + 1e-9, observers=[snaps])
        return res.records[0]

    base_fields = run(ctx.mu)
    worst_low, worst_up = 0.0, 0.0
    for sigma in sigmas:
        mu_k = measures.speed_measure(
            ctx.mu.cstar, atoms=list(ctx.mu.atoms) + [(cstar, sigma)],
            pieces=ctx.mu.density_pieces,
            mass_at_infinity=ctx.mu.mass_at_infinity)
        pert_fields = run(mu_k)
        for fb, fp in zip(base_fields, pert_fields):
            diff = fp.values - fb.values
            worst_low = max(worst_low, float(np.max(-diff)))
            cap = P.value(fb.x() - cstar * fb.time - cstar * math.log(sigma))
            worst_up = max(worst_up, float(np.max(diff - cap)))
    ok = worst_low <= tol and worst_up <= tol
    return CheckResult("critical-atom-perturbation", bool(ok),
                       {"max_negative": worst_low, "max_excess": worst_up,
                        "tol": tol, "sigmas": sigmas})


@register_check("measure-decomposition",
                "restriction lower bound and split-translate upper bound")
def _check_measure_decomposition(ctx: RunContext, params: dict) -> CheckResult:
    c_mid = float(params.get("c_mid", 3.2))
    tol = float(params.get("tol", 5e-3))
    n = float(params.get("n", 20.0))
    targets = [float(t) for t in params.get("targets", (-10.0, 0.0, 10.0))]
    info = ctx.support
    if not (info.c_minus < c_mid < info.c_plus):
        raise ConfigError(f"c_mid = {c_mid} must split the support "
                          f"({info.c_minus}, {info.c_plus})")
    mu = ctx.mu
    mu1 = _restrict(mu, info.c_minus, c_mid)
    mu2 = _restrict(mu, c_mid, info.c_plus)
    M, M1, M2 = mu.bulk_mass, mu1.bulk_mass, mu2.bulk_mass
    xi1 = c_mid * math.log(M1 / M)
    xi2 = info.c_plus * math.log(M2 / M)
    base = pde.Grid1D(-0.5 * ctx.cfg.width, ctx.cfg.dx,
                      int(round(ctx.cfg.width / ctx.cfg.dx)) + 1)
    grid = measures.centered_grid(base, measures.scan_front_position(mu, n, ctx.family))
    co = pde.Coefficients.kpp(ctx.nl)

    def run(m):
        bcs = measures.boundary_clamps(m, ctx.family)
        cfg = pde.SolverConfig(dt=ctx.cfg.dt, window="fixed",
                               bc_left=bcs[0], bc_right=bcs[1])
        u0 = measures.initial_condition(m, n, grid, ctx.family)
        snaps = pde.Observer(targets, lambda f: f.copy())
        return pde.evolve(u0, co, cfg, targets[-1] + 1e-9,
                          observers=[snaps]).records[0]

    f_mu = run(mu)
    f_1 = run(mu1)
    f_2 = run(mu2)
    worst_lower = worst_upper = 0.0
    for fm, f1, f2 in zip(f_mu, f_1, f_2):
        x = fm.x()
        lower = (M1 / M) * f1.values
        worst_lower = max(worst_lower, float(np.max(lower - fm.values)))
        u1 = np.interp(x + xi1, x, f1.values)
        u2 = np.interp(x + xi2, x, f2.values)
        upper = np.minimum(u1 + u2, 1.0)
        worst_upper = max(worst_upper, float(np.max(fm.values - upper)))
    ok = worst_lower <= tol and worst_upper <= tol
    return CheckResult("measure-decomposition", bool(ok), {
        "restriction_violation": worst_lower, "split_violation": worst_upper,
        "tol": tol, "c_mid": c_mid, "offsets": (xi1, xi2)})


def _restrict(mu: measures.SpeedMeasure, lo: float, hi: float) -> measures.SpeedMeasure:
    atoms = [(c, m) for c, m in mu.atoms if lo - 1e-12 <= c <= hi + 1e-12]
    pieces = []
    for p in mu.density_pieces:
        a, b = max(p.lo, lo), min(p.hi, hi)
        if a < b:
            pieces.append(measures.DensityPiece(a, b, p.density, p.label))
    return measures.speed_measure(mu.cstar, atoms=atoms, pieces=pieces)


@register_check("oscillation", "local position oscillations bounded, stable in the horizon")
def _check_oscillation(ctx: RunContext, params: dict) -> CheckResult:
    tau = float(params.get("tau", 1.0))
    stability_rtol = float(params.get("stability_rtol", 0.10))
    tr = ctx.trace
    full = analysis.oscillation_bound(tr, tau)
    t_mid = tr.times[0] + 0.5 * tr.horizon
    half = analysis.oscillation_bound(tr.restricted(tr.times[0], t_mid), tau)
    change = abs(full.sup_oscillation - half.sup_oscillation) / max(half.sup_oscillation, 1e-12)
    ok = np.isfinite(full.sup_oscillation) and change <= stability_rtol
    return CheckResult("oscillation", bool(ok), {
        "bound_full": full.sup_oscillation, "bound_half": half.sup_oscillation,
        "relative_change": change, "tail_speed_bound": full.tail_speed_bound})


@register_check("intersections", "crossing counts of evolved pairs never increase")
def _check_intersections(ctx: RunContext, params: dict) -> CheckResult:
    n_pairs = int(params.get("n_pairs", 10))
    n_times = int(params.get("n_times", 20))
    horizon = float(params.get("horizon", 4.0))
    rng = np.random.default_rng(ctx.cfg.seed)
    grid = pde.Grid1D(-50.0, ctx.cfg.dx, int(100.0 / ctx.cfg.dx) + 1)
    x = grid.x()
    P = ctx.family.get(2.5 if ctx.nl.critical_speed <= 2.5 else ctx.nl.critical_speed * 1.25)
    cfg = pde.SolverConfig(dt=ctx.cfg.dt, window="fixed")
    co = pde.Coefficients.kpp(ctx.nl)
    check_times = np.linspace(horizon / n_times, horizon, n_times)
    series = []
    ok = True
    for _ in range(n_pairs):
        base_shift = rng.uniform(-4.0, 4.0)
        u_vals = P.value(x - base_shift)
        v_vals = P.value(x - base_shift - rng.uniform(0.5, 2.0))
        for _ in range(4):
            center = rng.uniform(-15.0, 15.0)
            amp = rng.uniform(-0.25, 0.25)
            width = rng.uniform(1.0, 4.0)
            v_vals = v_vals + amp * np.exp(-((x - center) / width) ** 2) * v_vals * (1 - v_vals) * 4
        v_vals = np.clip(v_vals, 1e-9, 1 - 1e-9)
        res = steepness.intersection_monotonicity(
            pde.Field(grid, u_vals, 0.0), pde.Field(grid, v_vals, 0.0),
            co, cfg, check_times)
        series.append(res.counts)
        ok = ok and res.nonincreasing
    return CheckResult("intersections", bool(ok),
                       {"pairs": n_pairs, "counts": series})


@register_check("classification", "measure classification matches expectations")
def _check_classification(ctx: RunContext, params: dict) -> CheckResult:
    cls = measures.classify(ctx.mu)
    ok = True
    details = {"is_transition_front": cls.is_transition_front,
               "c_minus": cls.predicted_c_minus, "c_plus": cls.predicted_c_plus,
               "shift_bounded_past": cls.shift_bounded_past,
               "shift_bounded_future": cls.shift_bounded_future}
    for key, expected in params.items():
        if key in details:
            got = details[key]
            same = (got == expected if not isinstance(expected, float)
                    else got is not None and np.isfinite(got) and abs(got - expected) < 1e-9)
            ok = ok and same
    return CheckResult("classification", bool(ok), details)


@register_check("profile-inequalities",
                "pointwise profile bounds and the uniform log-slope threshold")
def _check_profile_inequalities(ctx: RunContext, params: dict) -> CheckResult:
    cstar = ctx.nl.critical_speed
    speeds = [float(c) for c in params.get(
        "speeds", (cstar * 1.025, cstar * 1.25, cstar * 1.5, cstar * 2.0, cstar * 5.0))]
    ok = True
    worst = {}
    for c in speeds:
        d = profiles.profile_diagnostics(ctx.family.get(c))
        ok = ok and d.logderiv_ok and d.monotone_ok and (d.decay_bound_ok is not False)
        worst[round(c, 6)] = {"logderiv": d.logderiv_ok, "monotone": d.monotone_ok,
                              "decay_bound": d.decay_bound_ok, "residual": d.residual}
    gamma = float(params.get("gamma", 2.0 * cstar))
    eps = float(params.get("eps", 0.25 * cstar))
    grid_n = int(params.get("c_grid_points", 9))
    A = profiles.uniform_decay_constant(ctx.nl, gamma, eps,
                                        np.linspace(cstar, gamma, grid_n),
                                        profiles=ctx.family)
    ok = ok and np.isfinite(A)
    return CheckResult("profile-inequalities", bool(ok),
                       {"per_speed": worst, "uniform_decay_abscissa": A,
                        "gamma": gamma, "eps": eps})


@register_check("exact-front-oracle", "closed-form front reproduced to tight tolerance")
def _check_exact_front(ctx: RunContext, params: dict) -> CheckResult:
    # Only meaningful for the quadratic reaction term, whose front at speed
    # 5/sqrt(6) has the closed form (1 + exp(xi/sqrt(6)))^-2.
    if ctx.nl.name != "logistic":
        raise ConfigError("exact-front-oracle applies to the logistic term")
    tol = float(params.get("tol", 1e-6))
    c = 5.0 / math.sqrt(6.0)
    P = profiles.solve_profile(ctx.nl, c, xi_range=(-37.0, 31.0))
    xi = np.linspace(-30.0, 30.0, 6001)
    exact = (1.0 + np.exp(xi / math.sqrt(6.0))) ** -2
    err = float(np.max(np.abs(P.value(xi) - exact)))
    ok = err <= tol and P.ode_residual <= float(params.get("residual_tol", 1e-8))
    return CheckResult("exact-front-oracle", bool(ok),
                       {"sup_error": err, "ode_residual": P.ode_residual, "tol": tol})


@register_check("decay-rate-law", "decay rates match the closed form and invert exactly")
def _check_decay_rate_law(ctx: RunContext, params: dict) -> CheckResult:
    fp0 = ctx.nl.fprime0
    cstar = ctx.nl.critical_speed
    speeds = [float(c) for c in params.get("speeds", (cstar, 2.5, 3.0, 4.0, 10.0))]
    worst = 0.0
    for c in speeds:
        lam = profiles.decay_rate(c, fp0)
        direct = (c - math.sqrt(max(c * c - 4.0 * fp0, 0.0))) / 2.0
        worst = max(worst, abs(lam - direct))
        if lam > 0:
            worst = max(worst, abs(profiles.rate_to_speed(lam, fp0) - c) / abs(c))
    ok = worst <= float(params.get("tol", 1e-12))
    return CheckResult("decay-rate-law", bool(ok), {"max_error": worst, "speeds": speeds})


@register_check("bramson-drift", "step data approaches the critical speed from below")
def _check_bramson_drift(ctx: RunContext, params: dict) -> CheckResult:
    cstar = ctx.nl.critical_speed
    tr = ctx.trace
    t = tr.times
    X = tr.position(0.5)
    late = t >= t[0] + 0.6 * tr.horizon
    slope = float(np.polyfit(t[late], X[late], 1)[0])
    below = slope < cstar + float(params.get("slack", 0.01))
    approaching = slope > cstar - float(params.get("deficit_cap", 0.2))
    # Drift against the logarithmically delayed prediction stays bounded.
    m = t > max(1.0, t[0] + 1.0)
    pred = cstar * t[m] - (3.0 / cstar) * np.log(t[m])
    drift = X[m] - pred
    drift_range = float(np.max(drift) - np.min(drift))
    ok = below and approaching and drift_range <= float(params.get("drift_band", 3.0))
    return CheckResult("bramson-drift", bool(ok), {
        "late_slope": slope, "critical_speed": cstar, "drift_range": drift_range})


# ---------------------------------------------------------------------------
# Pipeline.
# ---------------------------------------------------------------------------


@dataclass
class RunSummary:
    name: str
    passed: bool
    checks: list
    metrics: dict

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": [{"check": c.check, "passed": c.passed, "details": _jsonable(c.details)}
                       for c in self.checks],
            "metrics": _jsonable(self.metrics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunSummary:
    """Execute the pipeline and write artifacts; deterministic per config."""
    ctx = _build_context(cfg)
    u0 = _initial_field(ctx)
    track_times = np.arange(cfg.t_start + cfg.settle_time, cfg.t_end + 1e-9,
                            cfg.observe_every)
    tracker = analysis.FrontTracker(track_times)
    snaps = pde.Observer(cfg.snapshot_times, lambda f: f.copy())
    res = pde.evolve(u0, ctx.co, ctx.solver_cfg, cfg.t_end,
                     observers=[tracker.observer(), snaps])
    ctx.trace = tracker.trace()
    ctx.snapshots = res.records[1]
    ctx.final = res.final

    results = []
    for cid in cfg.checks:
        fn, _doc = CHECKS[cid]
        params = cfg.check_params.get(cid, {})
        results.append(fn(ctx, params))

    metrics = {
        "n_steps": res.n_steps,
        "total_shift_cells": res.total_shift_cells,
        "final_time": ctx.final.time,
        "grid": {"x0": ctx.final.grid.x0, "dx": ctx.final.grid.dx, "n": ctx.final.grid.n},
    }
    summary = RunSummary(name=cfg.name, passed=all(r.passed for r in results),
                         checks=results, metrics=metrics)
    if out_dir is not None:
        emit_outputs(summary, ctx, out_dir, cfg.formats)
    return summary


def emit_outputs(summary: RunSummary, ctx: RunContext, out_dir, formats) -> None:
    """Write trace CSV, plot-ready columns, checkpoints, and the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    if formats in (None, ["none"], "none"):
        return
    if "trace" in formats and ctx.trace is not None:
        analysis.write_trace_csv(ctx.trace, out / "trace.csv")
    if "plots" in formats and ctx.trace is not None:
        plots = out / "plots"
        plots.mkdir(exist_ok=True)
        tr = ctx.trace
        X = tr.position(0.5)
        _write_columns(plots / "position_vs_time.csv", ("t", "X_half"),
                       tr.times, X)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(tr.times) > 1e-9, X / tr.times, np.nan)
        _write_columns(plots / "speed_ratio_vs_time.csv", ("t", "X_over_t"),
                       tr.times, ratio)
        _write_columns(plots / "width_vs_time.csv",
                       (f"t", f"width_{tr.width_levels[0]:g}_{tr.width_levels[1]:g}"),
                       tr.times, tr.widths)
        try:
            f0 = ctx.snapshot_at(0.0)
        except (InvalidInput, KPPError):
            f0 = ctx.final
        pos = f0.values > 0.0
        _write_columns(plots / "log_tail.csv", ("x", "log_u"),
                       f0.x()[pos], np.log(f0.values[pos]))
    if "checkpoints" in formats:
        cks = out / "checkpoints"
        cks.mkdir(exist_ok=True)
        for f in ctx.snapshots:
            pde.save_field(f, cks / f"field_t{f.time:+08.3f}.txt")


def _write_columns(path, headers, *cols) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(headers) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# Command line.
# ---------------------------------------------------------------------------


def bundled_configs() -> dict:
    """Name -> path for the experiment suite shipped with the package."""
    root = resources.files("kppfronts") / "configs"
    return {p.name[:-5]: p for p in sorted(root.iterdir(), key=lambda q: q.name)
            if p.name.endswith(".json")}


def _run_one(args_tuple):
    path, out_dir, overrides = args_tuple
    cfg = ExperimentConfig.load(path, overrides)
    summary = run_experiment(cfg, out_dir=out_dir)
    return summary.to_dict()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kppfronts",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_prof = sub.add_parser("profile", help="compute and export a front profile")
    p_prof.add_argument("--c", type=float, required=True)
    p_prof.add_argument("--nonlinearity", default="logistic")
    p_prof.add_argument("--xi-min", type=float, default=None)
    p_prof.add_argument("--xi-max", type=float, default=None)
    p_prof.add_argument("--out", required=True)

    for name, help_text in (("simulate", "run a config and emit artifacts"),
                            ("verify", "run a config; exit 1 on check failure")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--dx", type=float, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--horizon", default=None, help="T0:T1 override")
        p.add_argument("--jobs", type=int, default=1)

    p_all = sub.add_parser("verify-all", help="run the bundled experiment suite")
    p_all.add_argument("--suite", default=None, help="directory of configs")
    p_all.add_argument("--out", default="runs")
    p_all.add_argument("--jobs", type=int, default=1)

    sub.add_parser("list-checks", help="list verification check ids")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except KPPError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def _dispatch(args) -> int:
    if args.command == "list-checks":
        for cid in sorted(CHECKS):
            print(f"{cid:28s} {CHECKS[cid][1]}")
        return 0

    if args.command == "profile":
        nl = named(args.nonlinearity)
        rng = None
        if args.xi_min is not None and args.xi_max is not None:
            rng = (args.xi_min, args.xi_max)
        P = profiles.solve_profile(nl, args.c, xi_range=rng)
        profiles.save_profile(P, args.out)
        print(f"wrote profile c={P.c:.6g} lambda={P.lambda_c:.6g} "
              f"({P.xi_grid[0]:.2f} .. {P.xi_grid[-1]:.2f}) to {args.out}")
        return 0

    if args.command in ("simulate", "verify"):
        overrides = {"dx": args.dx, "dt": args.dt, "horizon": args.horizon}
        cfg = ExperimentConfig.load(args.config, overrides)
        out_dir = args.out or f"runs/{cfg.name}"
        summary = run_experiment(cfg, out_dir=out_dir)
        for c in summary.checks:
            print(f"[{cfg.name}] {c.check:28s} {'PASS' if c.passed else 'FAIL'}")
        print(f"[{cfg.name}] artifacts in {out_dir}")
        if args.command == "verify" and not summary.passed:
            return 1
        return 0

    if args.command == "verify-all":
        if args.suite:
            paths = sorted(Path(args.suite).glob("*.json"))
            entries = [(p.stem, p) for p in paths]
        else:
            entries = list(bundled_configs().items())
        if not entries:
            raise ConfigError("no configs found for verify-all")
        jobs = [(str(path), str(Path(args.out) / name), {}) for name, path in entries]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                outcomes = list(pool.map(_run_one, jobs))
        else:
            outcomes = [_run_one(j) for j in jobs]
        failed = 0
        for outcome in outcomes:
            for c in outcome["checks"]:
                status = "PASS" if c["passed"] else "FAIL"
                print(f"[{outcome['name']}] {c['check']:28s} {status}")
            if not outcome["passed"]:
                failed += 1
        print(f"suite: {len(outcomes) - failed}/{len(outcomes)} configs passed")
        return 1 if failed else 0

    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
