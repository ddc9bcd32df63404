"""Reaction terms of monostable type and the spatially uniform solution.

A reaction term f lives on [0, 1] with f(0) = f(1) = 0 and f > 0 inside.
Two admissible classes are distinguished: concave terms ("concave-kpp") and
terms merely dominated by their linearization at 0 ("sub-tangential",
0 < f(u) <= fprime0 * u).  Validation is purely numerical, on a sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, InvalidInput

CONCAVE_KPP = "concave-kpp"
SUB_TANGENTIAL = "sub-tangential"

# Saturation guard for the uniform solution as it approaches the stable state.
SATURATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A validated reaction term.

    Attributes
    ----------
    f : callable
        Vectorized map from state in [0, 1] to reaction rate (1/time).
    fprime0 : float
        Slope of f at 0, supplied by the caller and cross-checked.
    kind : str
        Either ``"concave-kpp"`` or ``"sub-tangential"``.
    name : str
        Display name; "logistic" for the built-in quadratic term.
    """

    f: Callable[[np.ndarray], np.ndarray]
    fprime0: float
    kind: str
    name: str = "custom"

    def __call__(self, s):
        return self.f(s)

    @property
    def critical_speed(self) -> float:
        return 2.0 * np.sqrt(self.fprime0)

    def slope_bound(self, n_samples: int = 512) -> float:
        """Upper estimate of sup |f'| over [0, 1] from difference quotients."""
        s = np.linspace(0.0, 1.0, n_samples)
        v = np.asarray(self.f(s), dtype=float)
        return float(np.max(np.abs(np.diff(v) / np.diff(s))))


@dataclass
class ValidationReport:
    """Outcome of validating a candidate reaction term."""

    classification: str | None
    failures: list[str] = field(default_factory=list)
    concave: bool = False
    sub_tangential: bool = False

    @property
    def accepted(self) -> bool:
        return self.classification is not None


def validate_kpp(f, fprime0: float, n_samples: int = 256) -> ValidationReport:
    """Classify a candidate reaction term on a sample grid.

    Returns ``concave-kpp`` when the endpoint, positivity, slope and
    concavity checks all pass; ``sub-tangential`` when concavity fails but
    0 < f(u) <= fprime0*u holds; otherwise a rejection listing every
    violated condition.
    """
    if n_samples < 16:
        raise InvalidInput(f"n_samples must be >= 16, got {n_samples}")
    s = np.linspace(0.0, 1.0, int(n_samples))
    v = np.asarray(f(s), dtype=float)
    if v.shape != s.shape:
        raise InvalidInput("f must map a sample vector to a vector of equal length")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("f takes non-finite values on [0, 1]")

    failures: list[str] = []
    scale = max(1.0, float(np.max(np.abs(v))))
    atol_end = 1e-12 * scale
    if abs(v[0]) > atol_end:
        failures.append(f"f(0) = {v[0]:.3e} != 0")
    if abs(v[-1]) > atol_end:
        failures.append(f"f(1) = {v[-1]:.3e} != 0")
    interior = v[1:-1]
    if np.any(interior <= 0.0):
        k = int(np.argmin(interior))
        failures.append(f"f({s[1 + k]:.4f}) = {interior[k]:.3e} <= 0 inside (0,1)")

    if not (np.isfinite(fprime0) and fprime0 > 0.0):
        failures.append(f"fprime0 = {fprime0} must be a positive number")
    else:
        h = 1e-6
        slope = float(np.asarray(f(np.array([h])), dtype=float)[0]) / h
        if abs(slope - fprime0) > 1e-3 * abs(fprime0):
            failures.append(
                f"forward difference f(h)/h = {slope:.6g} at h={h} disagrees "
                f"with fprime0 = {fprime0:.6g} beyond 1e-3 relative"
            )

    # Nonpositive centered second differences, tolerance scaled by max |f|.
    second = v[:-2] - 2.0 * v[1:-1] + v[2:]
    concave = bool(np.all(second <= 1e-9 * scale))

    sub_tangential = False
    if np.isfinite(fprime0) and fprime0 > 0.0:
        bound = fprime0 * s[1:-1]
        sub_tangential = bool(
            np.all(interior > 0.0) and np.all(interior <= bound * (1.0 + 1e-9) + atol_end)
        )

    if failures:
        return ValidationReport(None, failures, concave, sub_tangential)
    if concave:
        return ValidationReport(CONCAVE_KPP, [], True, sub_tangential)
    if sub_tangential:
        return ValidationReport(SUB_TANGENTIAL, [], False, True)
    failures.append("f is neither concave nor dominated by fprime0*u on (0,1)")
    return ValidationReport(None, failures, concave, sub_tangential)


def make_nonlinearity(f, fprime0: float, n_samples: int = 256, name: str = "custom") -> Nonlinearity:
    """Validate ``f`` and wrap it; raises InvalidInput on rejection."""
    report = validate_kpp(f, fprime0, n_samples)
    if not report.accepted:
        raise InvalidInput("reaction term rejected: " + "; ".join(report.failures))
    return Nonlinearity(f=f, fprime0=float(fprime0), kind=report.classification, name=name)


def _logistic(s):
    s = np.asarray(s, dtype=float)
    return s * (1.0 - s)


_NAMED: dict[str, tuple[Callable, float]] = {
    "logistic": (_logistic, 1.0),
}


def named(name: str) -> Nonlinearity:
    """Built-in reaction terms selectable by id ("logistic" = s(1-s))."""
    try:
        f, fp0 = _NAMED[name]
    except KeyError:
        raise InvalidInput(f"unknown nonlinearity id {name!r}; known: {sorted(_NAMED)}") from None
    return make_nonlinearity(f, fp0, name=name)


def from_table(s_values, f_values, fprime0: float, n_samples: int = 256,
               name: str = "table") -> Nonlinearity:
    """Reaction term from tabulated (s, f(s)) pairs, monotone-cubic interpolated.

    The table must cover [0, 1]; validation happens on the interpolant, so
    class membership is only certified up to the table's resolution.
    """
    s = np.asarray(s_values, dtype=float)
    v = np.asarray(f_values, dtype=float)
    if s.ndim != 1 or s.shape != v.shape or s.size < 4:
        raise InvalidInput("table needs matching 1-d s and f(s) arrays with >= 4 rows")
    if not (np.all(np.diff(s) > 0) and s[0] <= 0.0 <= 1.0 <= s[-1]):
        raise InvalidInput("table abscissae must increase and cover [0, 1]")
    interp = PchipInterpolator(s, v, extrapolate=True)

    def f(u):
        return interp(np.asarray(u, dtype=float))

    return make_nonlinearity(f, fprime0, n_samples, name=name)


def critical_speed(nl: Nonlinearity) -> float:
    """Minimal front speed 2*sqrt(f'(0))."""
    return 2.0 * np.sqrt(nl.fprime0)


def homogeneous_solution(nl: Nonlinearity, t: float, return_flag: bool = False):
    """The spatially uniform solution of u' = f(u) pinned by its left tail.

    The solution is normalized so that value/exp(fprime0*t) -> 1 as
    t -> -infinity.  Once the value is within SATURATION_TOL of 1 the
    function returns 1 - SATURATION_TOL; with ``return_flag=True`` a
    (value, saturated) pair is returned.
    """
    fp0 = nl.fprime0
    t = float(t)
    t0 = -40.0 / fp0
    cap = 1.0 - SATURATION_TOL
    if t <= t0:
        val = float(np.exp(fp0 * t))
        return (val, False) if return_flag else val

    def rhs(_, y):
        return [float(nl.f(np.array([y[0]]))[0])]

    def hit_cap(_, y):
        return y[0] - cap

    hit_cap.terminal = True
    hit_cap.direction = 1.0

    sol = solve_ivp(rhs, [t0, t], [float(np.exp(fp0 * t0))], method="LSODA",
                    rtol=1e-11, atol=1e-30, events=hit_cap, dense_output=True)
    if not sol.success:
        raise DomainError(f"uniform-solution integration failed: {sol.message}")
    saturated = sol.status == 1
    val = cap if saturated else float(sol.y[0, -1])
    val = min(val, cap)
    return (val, saturated) if return_flag else val
