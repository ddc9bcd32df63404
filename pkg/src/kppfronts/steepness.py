"""Intersection counting and steepness comparisons against front profiles.

Two evolved fields can only lose sign changes of their difference, never
gain them; that zero-counting fact underlies the steepness sandwiches: a
superposition solution is steeper than the profile of any speed at or above
its support (anchored at equal values it sits higher to the left, lower to
the right) and less steep than the profile of any speed at or below the
support.  The critical profile is the steepest comparison of all, for any
time-global solution.  All checks here are pointwise grid scans with an
explicit tolerance; a dead band filters rounding-level ties out of the
crossing counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .pde import Coefficients, Field, Observer, SolverConfig, evolve
from .profiles import FrontProfile

STEEPER = "steeper"
LESS_STEEP = "less_steep"

DEFAULT_DEAD_BAND = 1e-9


def sign_changes(u: Field, v: Field, dead_band: float = DEFAULT_DEAD_BAND) -> int:
    """Sign alternations of u - v scanned left to right.

    Samples with |u - v| <= dead_band carry no information and inherit the
    last confirmed sign, so rounding-level ties do not create crossings.
    """
    if dead_band < 0:
        raise InvalidInput("dead_band must be >= 0")
    if u.grid != v.grid:
        raise InvalidInput("sign_changes requires a common grid")
    d = u.values - v.values
    confirmed = np.abs(d) > dead_band
    s = np.sign(d[confirmed])
    if s.size < 2:
        return 0
    return int(np.sum(s[1:] != s[:-1]))


@dataclass
class IntersectionSeries:
    times: list
    counts: list

    @property
    def nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.counts[:-1], self.counts[1:]))


def intersection_monotonicity(u0: Field, v0: Field, co: Coefficients,
                              cfg: SolverConfig, check_times: Sequence[float],
                              dead_band: float = DEFAULT_DEAD_BAND) -> IntersectionSeries:
    """Evolve a pair with one scheme and count crossings at the check times.

    Runs on a fixed window (both solutions must share a grid throughout).
    """
    if u0.grid != v0.grid:
        raise InvalidInput("intersection check requires a common grid")
    check_times = sorted(float(t) for t in check_times)
    fixed = SolverConfig(dt=cfg.dt, boundary=cfg.boundary, window="fixed",
                         margin=cfg.margin, bc_left=cfg.bc_left, bc_right=cfg.bc_right)
    snap_u = Observer(check_times, lambda f: f.copy())
    snap_v = Observer(check_times, lambda f: f.copy())
    ru = evolve(u0, co, fixed, check_times[-1] + 1e-9, observers=[snap_u])
    rv = evolve(v0, co, fixed, check_times[-1] + 1e-9, observers=[snap_v])
    counts = [sign_changes(fu, fv, dead_band)
              for fu, fv in zip(ru.records[0], rv.records[0])]
    return IntersectionSeries(times=check_times, counts=counts)


@dataclass
class SandwichReport:
    """Worst-case violations of a steepness sandwich over all anchors."""

    points_checked: int
    max_violation_left: float
    max_violation_right: float
    tolerance: float
    slope_ok: bool | None = None      # set only in steeper mode

    @property
    def passed(self) -> bool:
        return (self.max_violation_left <= self.tolerance
                and self.max_violation_right <= self.tolerance)


def steepness_check(u: Field, P: FrontProfile, anchors: Sequence[float],
                    direction: str, tol: float) -> SandwichReport:
    """Compare a nonincreasing field against a profile anchored at each point.

    ``steeper``: the field must dominate the value-matched profile left of
    every anchor and sit below it to the right; ``less_steep`` reverses the
    inequalities.  In steeper mode the anchored slope consequence is also
    checked: the discrete field slope at the anchor must not exceed the
    profile slope at the matched level (within the same tolerance).
    """
    if direction not in (STEEPER, LESS_STEEP):
        raise InvalidInput(f"direction must be '{STEEPER}' or '{LESS_STEEP}'")
    v = u.values
    # Boundary cells may carry envelope clamps; judge monotonicity inside.
    if np.any(np.diff(v[1:-1]) > 1e-9):
        raise InvalidInput("steepness comparison expects a nonincreasing field")
    x = u.x()
    worst_left = worst_right = 0.0
    checked = 0
    slope_ok: bool | None = None
    for X in anchors:
        if not x[0] <= X <= x[-1]:
            raise InvalidInput(f"anchor {X} outside the grid")
        uX = float(np.interp(X, x, v))
        if not 1e-12 < uX < 1.0 - 1e-12:
            raise InvalidInput(f"anchor value {uX} at X={X} leaves (0,1)")
        ref = P.value(P.inverse(uX) + (x - X))
        diff = v - ref
        left = x <= X
        right = x >= X
        if direction == STEEPER:
            # u >= ref - tol on the left, u <= ref + tol on the right
            worst_left = max(worst_left, float(np.max(-diff[left], initial=0.0)))
            worst_right = max(worst_right, float(np.max(diff[right], initial=0.0)))
            du = float(np.interp(X, x[:-1] + 0.5 * u.grid.dx, np.diff(v) / u.grid.dx))
            ok = du <= float(P.derivative(P.inverse(uX))) + tol
            slope_ok = ok if slope_ok is None else (slope_ok and ok)
        else:
            worst_left = max(worst_left, float(np.max(diff[left], initial=0.0)))
            worst_right = max(worst_right, float(np.max(-diff[right], initial=0.0)))
        checked += int(np.sum(left)) + int(np.sum(right))
    return SandwichReport(points_checked=checked, max_violation_left=worst_left,
                          max_violation_right=worst_right, tolerance=float(tol),
                          slope_ok=slope_ok)


def critical_steepest_check(u: Field, P_star: FrontProfile,
                            anchors: Sequence[float], tol: float) -> SandwichReport:
    """Less-steep sandwich against the critical profile.

    Valid for any (approximate) time-global solution strictly between the
    equilibria; callers should have evolved from a start time well in the
    past for the comparison to be meaningful.
    """
    if not P_star.is_critical:
        raise InvalidInput("critical_steepest_check needs the critical profile")
    return steepness_check(u, P_star, anchors, LESS_STEEP, tol)


def anchors_at_levels(u: Field, levels: Sequence[float]) -> list:
    """Anchor coordinates located at the given field levels."""
    from .analysis import level_position

    return [level_position(u, m) for m in levels]


def default_sandwich_tol(P: FrontProfile, dx: float, floor: float = 5e-3) -> float:
    """Tolerance coupling a fixed floor to the interpolation scale."""
    return floor + 2.0 * dx * P.max_slope()
