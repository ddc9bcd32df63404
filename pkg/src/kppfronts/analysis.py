"""Front positions, widths, speeds, and tail decay read off evolved fields.

Positions are level crossings X_m(t) with u(t, X_m(t)) = m, taking the
leftmost crossing for non-monotone fields.  Speeds come from least-squares
fits of X_m(t) over the outer quarters of the observation horizon (past /
future windows); a global mean speed is reported only when the two windows
agree within 5 percent and the joint fit is tight.  Tail decay rates are
log-linear fits over a level window of the right tail, mapped to a
predicted future speed through the rate-to-speed relation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dfield
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    InsufficientDataError,
    InvalidInput,
    NotBracketedError,
    ResolutionError,
)
from .pde import Field, Observer
from .profiles import FrontProfile, rate_to_speed


def level_position(u: Field, m: float) -> float:
    """Leftmost space coordinate where the field crosses level ``m``.

    For nonincreasing fields this is the unique crossing, located by
    monotone linear interpolation between the bracketing grid points.
    """
    if not 0.0 < m < 1.0:
        raise DomainError(f"level must lie in (0,1), got {m}")
    v = u.values
    d = v - m
    hits = np.nonzero(d[:-1] * d[1:] <= 0.0)[0]
    hits = hits[(d[hits] != 0.0) | (d[hits + 1] != 0.0)]
    if hits.size == 0:
        raise NotBracketedError(f"level {m} not attained on the grid")
    i = int(hits[0])
    x = u.x()
    denom = d[i] - d[i + 1]
    frac = d[i] / denom if denom != 0.0 else 0.0
    return float(x[i] + frac * (x[i + 1] - x[i]))


def interface_width(u: Field, a: float, b: float) -> float:
    """Diameter of the grid set where a <= u <= b; zero when empty."""
    if not (0.0 < a <= b < 1.0):
        raise DomainError(f"need 0 < a <= b < 1, got ({a}, {b})")
    mask = (u.values >= a) & (u.values <= b)
    if not mask.any():
        return 0.0
    idx = np.nonzero(mask)[0]
    return float((idx[-1] - idx[0]) * u.grid.dx)


@dataclass
class FrontTrace:
    """Time series of level positions and interface widths."""

    times: np.ndarray
    positions: dict                      # level -> array of X_m(t), NaN if lost
    widths: np.ndarray                   # width for width_levels at each time
    width_levels: tuple

    def position(self, level: float) -> np.ndarray:
        try:
            return self.positions[level]
        except KeyError:
            raise InvalidInput(f"trace does not track level {level}; "
                               f"tracked: {sorted(self.positions)}") from None

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def restricted(self, t_min: float, t_max: float) -> "FrontTrace":
        m = (self.times >= t_min) & (self.times <= t_max)
        return FrontTrace(self.times[m],
                          {k: v[m] for k, v in self.positions.items()},
                          self.widths[m], self.width_levels)


class FrontTracker:
    """Observer that accumulates a FrontTrace while a field evolves."""

    def __init__(self, times: Sequence[float], levels=(0.1, 0.5, 0.9),
                 width_levels=(0.1, 0.9)):
        self.times = np.sort(np.asarray(times, dtype=float))
        self.levels = tuple(levels)
        self.width_levels = tuple(width_levels)
        self._rows = []

    def __call__(self, f: Field):
        row = [f.time]
        for m in self.levels:
            try:
                row.append(level_position(f, m))
            except NotBracketedError:
                row.append(math.nan)
        row.append(interface_width(f, *self.width_levels))
        self._rows.append(row)
        return row

    def observer(self) -> Observer:
        return Observer(self.times, self)

    def trace(self) -> FrontTrace:
        if not self._rows:
            raise InsufficientDataError("tracker recorded no rows")
        arr = np.asarray(self._rows, dtype=float)
        positions = {m: arr[:, 1 + i] for i, m in enumerate(self.levels)}
        return FrontTrace(arr[:, 0], positions, arr[:, -1], self.width_levels)


@dataclass
class SpeedFit:
    slope: float
    intercept: float
    window: tuple
    residual_rms: float


def _fit(times: np.ndarray, xs: np.ndarray, window: tuple) -> SpeedFit:
    m = (times >= window[0]) & (times <= window[1]) & np.isfinite(xs)
    if m.sum() < 2:
        raise InsufficientDataError(f"fewer than 2 finite samples in window {window}")
    t, x = times[m], xs[m]
    slope, intercept = np.polyfit(t, x, 1)
    resid = x - (slope * t + intercept)
    return SpeedFit(float(slope), float(intercept), (float(window[0]), float(window[1])),
                    float(np.sqrt(np.mean(resid ** 2))))


@dataclass
class SpeedEstimates:
    past: SpeedFit
    future: SpeedFit
    global_fit: SpeedFit | None


def speed_estimates(trace: FrontTrace, m: float = 0.5,
                    window_fraction: float = 0.25,
                    agreement_rtol: float = 0.05,
                    residual_tol: float = 2.0) -> SpeedEstimates:
    """Past/future speeds from the outer quarters of the horizon.

    A global mean speed is reported when the two slopes agree within
    ``agreement_rtol`` (relative to max(1, |future|)) and the joint
    least-squares residual stays below ``residual_tol`` space units.
    """
    xs = trace.position(m)
    t = trace.times
    n_neg = int(np.sum((t < 0) & np.isfinite(xs)))
    n_pos = int(np.sum((t > 0) & np.isfinite(xs)))
    if n_neg < 20 or n_pos < 20:
        raise InsufficientDataError(
            f"need >= 20 samples on each side of t = 0, got {n_neg}/{n_pos}")
    t0, t1 = float(t[0]), float(t[-1])
    span = t1 - t0
    past = _fit(t, xs, (t0, t0 + window_fraction * span))
    future = _fit(t, xs, (t1 - window_fraction * span, t1))
    joint = _fit(t, xs, (t0, t1))
    agree = abs(past.slope - future.slope) <= agreement_rtol * max(1.0, abs(future.slope))
    global_fit = joint if (agree and joint.residual_rms <= residual_tol) else None
    return SpeedEstimates(past=past, future=future, global_fit=global_fit)


@dataclass
class TransitionVerdict:
    verdict: bool
    width_sup: float
    growth_slope: float


def is_transition_front(trace: FrontTrace, a: float, b: float,
                        width_cap: float = math.inf,
                        slope_tol: float = 1e-2) -> TransitionVerdict:
    """Bounded-interface verdict from the width series.

    True when the observed widths stay below ``width_cap`` and the fitted
    width growth over the later half of the horizon stays below
    ``slope_tol`` space per time; the fitted slope doubles as divergence
    evidence when positive.
    """
    if (a, b) != trace.width_levels:
        raise InvalidInput(
            f"trace tracks width for levels {trace.width_levels}, not ({a}, {b})")
    if trace.horizon < 10.0:
        raise InsufficientDataError("need at least 10 time units of trace")
    t = trace.times
    w = trace.widths
    half = t >= t[0] + 0.5 * trace.horizon
    slope = float(np.polyfit(t[half], w[half], 1)[0])
    sup = float(np.max(w))
    return TransitionVerdict(bool(sup <= width_cap and slope < slope_tol), sup, slope)


@dataclass
class OscillationReport:
    sup_oscillation: float
    tau: float
    tail_speed_bound: float


def oscillation_bound(trace: FrontTrace, tau: float, m: float = 0.5) -> OscillationReport:
    """Empirical sup of |X(t) - X(s)| over pairs with |t - s| <= tau.

    Also reports the implied tail speed bound sup |X(t)| / |t| over the
    outer half of the horizon.
    """
    if tau > trace.horizon:
        raise InvalidInput(f"tau = {tau} exceeds the trace horizon {trace.horizon}")
    t = trace.times
    xs = trace.position(m)
    fin = np.isfinite(xs)
    t, xs = t[fin], xs[fin]
    sup = 0.0
    j0 = 0
    for i in range(len(t)):
        while t[j0] < t[i] - tau:
            j0 += 1
        seg = xs[j0:i + 1]
        sup = max(sup, float(seg.max() - seg.min()))
    cut = np.abs(t) >= 0.5 * np.max(np.abs(t))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.abs(xs[cut]) / np.abs(t[cut])
    ratios = ratios[np.isfinite(ratios)]
    bound = float(ratios.max()) if ratios.size else math.nan
    return OscillationReport(sup_oscillation=sup, tau=float(tau), tail_speed_bound=bound)


@dataclass
class TailDecay:
    lam: float
    predicted_c_plus: float | None
    fit_residual: float
    n_points: int
    out_of_range: bool
    low_confidence: bool


def tail_decay_rate(u: Field, fprime0: float,
                    fit_levels: tuple = (1e-8, 1e-3)) -> TailDecay:
    """Exponential decay rate of the right tail by log-linear regression.

    Fits log(u) vs x over the rightmost stretch where u lies inside
    ``fit_levels``; the rate maps to a predicted future speed when it falls
    strictly inside (0, sqrt(fprime0)), and is flagged out-of-range
    otherwise (a vanishing rate indicates a slower-than-exponential tail).
    """
    lo, hi = fit_levels
    if not 0.0 < lo < hi < 1.0:
        raise DomainError(f"fit levels must satisfy 0 < lo < hi < 1, got {fit_levels}")
    v = u.values
    above = np.nonzero(v >= hi)[0]
    if above.size == 0:
        raise ResolutionError("field never reaches the upper fit level")
    start = int(above[-1]) + 1
    window = np.nonzero((v[start:] >= lo) & (v[start:] <= hi))[0] + start
    if window.size < 8:
        raise ResolutionError(
            f"only {window.size} grid points resolve the tail window {fit_levels}")
    x = u.x()[window]
    y = np.log(v[window])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    lam = float(-slope)
    lam_star = math.sqrt(fprime0)
    out_of_range = not (1e-9 < lam < lam_star * (1.0 - 1e-9))
    predicted = None if out_of_range else float(rate_to_speed(lam, fprime0))
    low_conf = (not out_of_range) and lam > 0.9 * lam_star
    return TailDecay(lam=lam, predicted_c_plus=predicted, fit_residual=resid,
                     n_points=int(window.size), out_of_range=out_of_range,
                     low_confidence=low_conf)


@dataclass
class ProfileMatch:
    error: float
    shift: float


def profile_convergence_error(u: Field, P: FrontProfile,
                              exclude_margin: float = 0.0) -> ProfileMatch:
    """Sup-norm distance to a reference profile after half-level alignment.

    The field is shifted so its u = 1/2 crossing lands on the profile's;
    the reported shift realizes the bounded recentering function of the
    front.  ``exclude_margin`` trims that many space units at both window
    ends before taking the sup.
    """
    v = u.values
    # Boundary cells may carry envelope clamps; judge monotonicity inside.
    if np.any(np.diff(v[1:-1]) > 1e-9):
        raise InvalidInput("profile comparison expects a nonincreasing field")
    x_half = level_position(u, 0.5)
    shift = x_half - P.inverse(0.5)
    x = u.x()
    m = np.ones_like(x, dtype=bool)
    if exclude_margin > 0:
        m = (x >= x[0] + exclude_margin) & (x <= x[-1] - exclude_margin)
    err = float(np.max(np.abs(v[m] - P.value(x[m] - shift))))
    return ProfileMatch(error=err, shift=float(shift))


# ---------------------------------------------------------------------------
# Trace CSV export.
# ---------------------------------------------------------------------------


def write_trace_csv(trace: FrontTrace, path) -> None:
    """Columns: t, one X_m per tracked level, width(a,b)."""
    levels = sorted(trace.positions)
    a, b = trace.width_levels
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"X_{m:g}" for m in levels] + [f"width_{a:g}_{b:g}"])
        for i, t in enumerate(trace.times):
            row = [f"{t:.17g}"]
            row += [f"{trace.positions[m][i]:.17g}" for m in levels]
            row.append(f"{trace.widths[i]:.17g}")
            writer.writerow(row)


def read_trace_csv(path) -> FrontTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.asarray([[float(v) for v in row] for row in reader])
    levels = [float(h[2:]) for h in header[1:-1]]
    wl = header[-1].split("_")
    positions = {m: rows[:, 1 + i] for i, m in enumerate(levels)}
    return FrontTrace(rows[:, 0], positions, rows[:, -1],
                      (float(wl[-2]), float(wl[-1])))
