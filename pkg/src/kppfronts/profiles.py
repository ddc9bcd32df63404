"""Traveling-front profiles, their decay rates, and profile-level checks.

A front profile phi_c solves phi'' + c*phi' + f(phi) = 0 with phi decreasing
from 1 to 0; it exists iff c >= 2*sqrt(f'(0)).  Profiles are normalized by
their right tail: phi_c(xi) ~ exp(-lambda_c*xi) for supercritical speeds and
phi(xi) ~ xi*exp(-lambda*xi) at the critical speed.

Computation strategy: the heteroclinic orbit is parametrized by the logit
w = log(phi/(1-phi)) and described by the bounded slope q = phi'/(phi(1-phi)),
which satisfies a regular scalar ODE in w.  Integration starts at the phi~1
end (the contracting direction, so seed errors decay) and runs far into the
tail; the tail normalization is then extracted as a convergent limit
functional (supercritical) or a linear tail regression (critical case, whose
algebraic prefactor converges slowly and is resolved to ~1e-3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import expit, logit

from .errors import (
    AccuracyError,
    DomainError,
    InvalidInput,
    NoFrontError,
    RangeError,
    ResolutionError,
)
from .nonlinearity import Nonlinearity

# Logit abscissa where integration starts; phi(w0) = 1 - 1.7e-15.
_W_START = 34.0
# Relative speed window treated as exactly critical.
_CRITICAL_REL_TOL = 1e-9
# Logit levels used for auto-ranged tabulation: phi in (~9e-8, 1-2e-7).
_W_LEFT_DEFAULT = 15.5
_W_RIGHT_DEFAULT = -16.2


def decay_rate(c, fprime0: float):
    """Tail decay rate of the front with (extended) speed ``c``.

    Valid speeds form (-inf, -c*] u [c*, +inf) u {inf}; the rate is
    (|c| - sqrt(c^2 - 4 f'(0))) * sgn(c) / 2, and 0 for c = +-inf.
    Finite speeds inside (-c*, c*) raise DomainError.
    """
    if not (np.isfinite(fprime0) and fprime0 > 0):
        raise InvalidInput(f"fprime0 must be positive, got {fprime0}")
    cstar = 2.0 * math.sqrt(fprime0)

    def one(ci: float) -> float:
        if math.isinf(ci):
            return 0.0
        if abs(ci) < cstar * (1.0 - 1e-12):
            raise DomainError(f"speed {ci} lies inside (-{cstar}, {cstar}); no front decay rate")
        disc = max(ci * ci - 4.0 * fprime0, 0.0)
        # (|c| - sqrt(disc))/2 in cancellation-free form.
        return math.copysign(2.0 * fprime0 / (abs(ci) + math.sqrt(disc)), ci)

    if np.ndim(c) == 0:
        return one(float(c))
    return np.array([one(float(ci)) for ci in np.asarray(c).ravel()]).reshape(np.shape(c))


def rate_to_speed(lam, fprime0: float):
    """Inverse of :func:`decay_rate`: lam + f'(0)/lam, with 0 -> inf."""
    lam_arr = np.asarray(lam, dtype=float)
    lam_star = math.sqrt(fprime0)
    if np.any(np.abs(lam_arr) > lam_star * (1.0 + 1e-12)):
        raise DomainError(f"decay rate outside [-{lam_star}, {lam_star}]")
    with np.errstate(divide="ignore"):
        out = np.where(lam_arr == 0.0, np.inf, lam_arr + fprime0 / np.where(lam_arr == 0.0, 1.0, lam_arr))
    if np.ndim(lam) == 0:
        return float(out)
    return out


@dataclass(frozen=True, eq=False)
class FrontProfile:
    """A tabulated decreasing traveling-front profile with tail formulas.

    ``phi_values`` strictly decrease along the uniform ``xi_grid``;
    ``phi_prime`` holds integrator-sourced derivative values.  Evaluation
    outside the grid uses the analytic tail formulas (exponential on the
    right, saddle-rate approach to 1 on the left).
    """

    c: float
    lambda_c: float
    xi_grid: np.ndarray
    phi_values: np.ndarray
    phi_prime: np.ndarray
    is_critical: bool
    normalization_residual: float
    fprime0: float
    mu_plus: float
    kappa: float = 0.0
    ode_residual: float = float("nan")

    def __post_init__(self):
        w = logit(self.phi_values)
        q = self.phi_prime / (self.phi_values * (1.0 - self.phi_values))
        object.__setattr__(self, "_w_of_xi", CubicHermiteSpline(self.xi_grid, w, q))
        # Inverse map xi(w): w decreases along xi, so reverse for increasing knots.
        object.__setattr__(
            self, "_xi_of_w", CubicHermiteSpline(w[::-1], self.xi_grid[::-1], 1.0 / q[::-1])
        )

    # -- evaluation ---------------------------------------------------------

    def value(self, xi):
        """Profile level at abscissa ``xi`` (scalar or array)."""
        x = np.asarray(xi, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        lo, hi = self.xi_grid[0], self.xi_grid[-1]
        inside = (x >= lo) & (x <= hi)
        out[inside] = expit(self._w_of_xi(x[inside]))
        left = x < lo
        if np.any(left):
            out[left] = 1.0 - (1.0 - self.phi_values[0]) * np.exp(self.mu_plus * (x[left] - lo))
        right = x > hi
        if np.any(right):
            out[right] = self._right_tail(x[right])
        return float(out[0]) if scalar else out

    def _right_tail(self, x):
        if self.is_critical:
            return (x + self.kappa) * np.exp(-self.lambda_c * x)
        return np.exp(-self.lambda_c * x)

    def derivative(self, xi):
        """d(phi)/d(xi), from the stored slope field inside the grid."""
        x = np.asarray(xi, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(np.clip(x, self.xi_grid[0], self.xi_grid[-1]))
        w = self._w_of_xi(x)
        q = self._w_of_xi.derivative()(x)
        phi = expit(w)
        out = q * phi * (1.0 - phi)
        return float(out[0]) if scalar else out

    def inverse(self, level):
        """Abscissa where the profile attains ``level`` in (0, 1)."""
        u = np.asarray(level, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise DomainError("level must lie strictly inside (0, 1)")
        out = np.empty_like(u)
        top, bottom = self.phi_values[0], self.phi_values[-1]
        inside = (u <= top) & (u >= bottom)
        out[inside] = self._xi_of_w(logit(u[inside]))
        above = u > top
        if np.any(above):
            out[above] = self.xi_grid[0] + np.log((1.0 - u[above]) / (1.0 - top)) / self.mu_plus
        below = u < bottom
        if np.any(below):
            out[below] = self._invert_right_tail(u[below])
        return float(out[0]) if scalar else out

    def _invert_right_tail(self, u):
        xi = -np.log(u) / self.lambda_c
        if self.is_critical:
            # Fixed-point iteration on xi = (log(xi + kappa) - log u)/lambda.
            for _ in range(60):
                xi_new = (np.log(np.maximum(xi + self.kappa, 1e-300)) - np.log(u)) / self.lambda_c
                if np.max(np.abs(xi_new - xi)) < 1e-13 * np.max(np.abs(xi_new)):
                    xi = xi_new
                    break
                xi = xi_new
        return xi

    # -- misc ---------------------------------------------------------------

    @property
    def dx(self) -> float:
        return float(self.xi_grid[1] - self.xi_grid[0])

    def max_slope(self) -> float:
        return float(np.max(np.abs(self.phi_prime)))


def evaluate(profile: FrontProfile, *, xi=None, level=None):
    """Evaluate a profile (``xi`` given) or its inverse (``level`` given)."""
    if (xi is None) == (level is None):
        raise InvalidInput("pass exactly one of xi= or level=")
    return profile.value(xi) if xi is not None else profile.inverse(level)


# ---------------------------------------------------------------------------
# Orbit integration in logit coordinates.
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class _Orbit:
    nl: Nonlinearity
    c: float
    lam: float
    lam_tilde: float
    mu_plus: float
    is_critical: bool
    sol: object           # scipy OdeSolution over [w_end, w_start]
    w_end: float
    shift: float          # xi_normalized = xi_raw - shift
    kappa: float
    norm_residual: float

    def xi_norm(self, w):
        return self.sol.sol(w)[1] - self.shift

    def right_tail_estimate(self, xi: float) -> float:
        if self.is_critical:
            return (xi + self.kappa) * math.exp(-self.lam * xi)
        return math.exp(-self.lam * xi)


def _reaction_ratio(nl: Nonlinearity):
    """g(w) = f(phi)/(phi*(1-phi)) on the logit line, with tail guards."""
    fp0 = nl.fprime0
    g_end = None

    def g(w: float) -> float:
        nonlocal g_end
        if w < -34.0:
            return fp0
        if w > 34.0:
            if g_end is None:
                phi = expit(34.0)
                g_end = float(nl.f(np.array([phi]))[0] / (phi * (1.0 - phi)))
            return g_end
        phi = expit(w)
        return float(nl.f(np.array([phi]))[0] / (phi * (1.0 - phi)))

    return g


def _solve_orbit(nl: Nonlinearity, c: float, is_critical: bool,
                 w_end: float | None = None, rtol: float = 1e-13) -> _Orbit:
    fp0 = nl.fprime0
    g = _reaction_ratio(nl)
    lam = math.sqrt(fp0) if is_critical else decay_rate(c, fp0)
    lam_tilde = c - lam

    if w_end is None:
        if is_critical:
            w_end = -60.0
        else:
            rate = lam_tilde / lam - 1.0
            w_end = -min(2000.0, max(48.0, 27.0 / max(rate, 0.015)))

    def rhs(w, y):
        q = y[0]
        phi = expit(w)
        dq = -c - g(w) / q - q * (1.0 - 2.0 * phi)
        dxi = 1.0 / q
        dh = lam / q + (1.0 - phi)
        return (dq, dxi, dh)

    g0 = g(_W_START)
    q0 = (c - math.sqrt(c * c + 4.0 * g0)) / 2.0
    h0 = math.log(expit(_W_START))
    sol = solve_ivp(rhs, [_W_START, w_end], [q0, 0.0, h0], method="LSODA",
                    rtol=rtol, atol=1e-14, dense_output=True)
    if not sol.success:
        raise AccuracyError(f"front orbit integration failed for c={c}: {sol.message}")

    if is_critical:
        shift, kappa, resid = _critical_shift(sol, lam)
    else:
        shift, kappa, resid = _supercritical_shift(sol, lam, lam_tilde, w_end)

    return _Orbit(nl=nl, c=c, lam=lam, lam_tilde=lam_tilde, mu_plus=-q0,
                  is_critical=is_critical, sol=sol, w_end=w_end,
                  shift=shift, kappa=kappa, norm_residual=resid)


def _supercritical_shift(sol, lam, lam_tilde, w_end):
    # h(w) = lam*xi_raw + log(phi) converges to L; shift = L/lam.
    L_end = float(sol.sol(w_end)[2])
    rate = lam_tilde / lam - 1.0
    if rate * abs(w_end) >= 35.0:
        # Correction term exp(rate*w) is below rounding at the endpoint.
        probe = float(sol.sol(0.8 * w_end)[2])
        return L_end / lam, 0.0, abs(L_end - probe)
    ws = np.linspace(max(0.55 * w_end, w_end + 35.0 / rate), w_end, 60)
    hs = sol.sol(ws)[2]
    basis = np.column_stack([np.ones_like(ws), np.exp(rate * (ws - w_end))])
    coef, *_ = np.linalg.lstsq(basis, hs, rcond=None)
    L_fit = float(coef[0])
    fit_resid = float(np.max(np.abs(basis @ coef - hs)))
    # Prefer the fitted limit when the endpoint has visibly not converged.
    if abs(L_fit - L_end) > 10.0 * fit_resid + 1e-12:
        return L_fit / lam, 0.0, abs(L_fit - L_end)
    return L_end / lam, 0.0, max(fit_resid, abs(L_fit - L_end))


def _critical_shift(sol, lam):
    # Tail model phi*exp(lam*xi_raw) = A*xi_raw + B, fitted on phi in [1e-11, 1e-5].
    wa, wb = logit(1e-5), logit(1e-11)
    ws = np.linspace(wa, wb, 400)
    q, xi_raw, _ = sol.sol(ws)
    phi_log = np.log(expit(ws))
    xi_ref = float(xi_raw[len(ws) // 2])
    F = np.exp(phi_log + lam * (xi_raw - xi_ref))
    A, B = np.polyfit(xi_raw, F, 1)
    resid = float(np.max(np.abs(np.polyval([A, B], xi_raw) - F)) / np.max(np.abs(F)))
    if A <= 0:
        raise AccuracyError("critical tail regression produced a nonpositive prefactor")
    shift = math.log(A) / lam + xi_ref
    kappa = shift + B / A  # after shifting: phi ~ (xi + kappa) e^{-lam xi}
    return shift, kappa, resid


def _ode_defect(orbit: _Orbit, nl: Nonlinearity, w_lo: float, w_hi: float) -> float:
    """Max residual of phi'' + c phi' + f(phi) implied by the dense solution."""
    g = _reaction_ratio(nl)
    ws = np.linspace(w_hi, w_lo, 240)
    h = 1e-4
    q = orbit.sol.sol(ws)[0]
    qp = (orbit.sol.sol(ws + h)[0] - orbit.sol.sol(ws - h)[0]) / (2.0 * h)
    phi = expit(ws)
    rhs = np.array([-orbit.c - g(w) / qi - qi * (1.0 - 2.0 * p)
                    for w, qi, p in zip(ws, q, phi)])
    return float(np.max(np.abs(qp - rhs) * np.abs(q) * phi * (1.0 - phi)))


# ---------------------------------------------------------------------------
# Public profile construction.
# ---------------------------------------------------------------------------


def suggest_range(nl: Nonlinearity, c: float) -> tuple[float, float]:
    """An abscissa range wide enough for both tail invariants."""
    orbit = _orbit_for(nl, c)
    return (float(orbit.xi_norm(_W_LEFT_DEFAULT)), float(orbit.xi_norm(_W_RIGHT_DEFAULT)))


_ORBIT_CACHE: dict[tuple[int, float], _Orbit] = {}


def _orbit_for(nl: Nonlinearity, c: float, w_end=None) -> _Orbit:
    if not np.isfinite(c):
        raise InvalidInput(f"profile speed must be finite, got {c}")
    cstar = nl.critical_speed
    if c < cstar * (1.0 - 1e-12):
        raise NoFrontError(f"no front exists for c = {c} < critical speed {cstar}")
    is_critical = abs(c - cstar) <= _CRITICAL_REL_TOL * cstar
    key = (id(nl), cstar if is_critical else float(c))
    orbit = _ORBIT_CACHE.get(key)
    if orbit is None or orbit.nl is not nl or (w_end is not None and orbit.w_end > w_end):
        orbit = _solve_orbit(nl, cstar if is_critical else float(c), is_critical, w_end=w_end)
        _ORBIT_CACHE[key] = orbit
    return orbit


def solve_profile(nl: Nonlinearity, c: float, xi_range: tuple[float, float] | None = None,
                  tol: float = 1e-8, dx: float | None = None) -> FrontProfile:
    """Compute the tail-normalized front profile for speed ``c``.

    Parameters
    ----------
    nl : Nonlinearity
    c : float
        Must satisfy c >= critical speed (1 - 1e-12); speeds within 1e-9
        relative of critical are solved as the critical profile.
    xi_range : (float, float), optional
        Tabulation window; must be wide enough for the tails to reach
        1e-6 and 1 - 1e-6 (RangeError otherwise, carrying a suggestion).
        Defaults to an automatic range satisfying both.
    tol : float
        Max-norm bound demanded of the tabulated ODE residual.
    dx : float, optional
        Grid spacing; defaults to 0.01 scaled up for flat (fast) fronts.
    """
    orbit = _orbit_for(nl, c)
    lam = orbit.lam
    if dx is None:
        dx = 0.01 * max(1.0, math.sqrt(nl.fprime0) / lam)

    if xi_range is None:
        xi_range = (float(orbit.xi_norm(_W_LEFT_DEFAULT)), float(orbit.xi_norm(_W_RIGHT_DEFAULT)))
    xi_min, xi_max = float(xi_range[0]), float(xi_range[1])
    if not xi_min < xi_max:
        raise InvalidInput(f"empty xi_range {xi_range}")

    xi_left_limit = float(orbit.xi_norm(_W_START) + 5.0 * dx)
    if xi_min < xi_left_limit:
        raise RangeError(
            f"xi_range extends to {xi_min}, left of the resolvable profile "
            f"start {xi_left_limit:.3f} where 1 - phi underflows",
            suggested_range=(xi_left_limit, xi_max))

    # Extend the orbit rightward if the tabulation outruns it.
    guard = 0
    while float(orbit.xi_norm(orbit.w_end)) < xi_max + 2.0 * dx:
        guard += 1
        if guard > 3:
            raise AccuracyError("orbit extension failed to cover requested range")
        phi_t = max(float(orbit.right_tail_estimate(xi_max + 2.0 * dx)), 1e-290)
        w_need = math.log(phi_t) - 6.0  # logit(phi) ~ log(phi) for tiny phi
        orbit = _orbit_for(nl, c, w_end=min(orbit.w_end - 10.0, w_need))

    n = int(math.floor((xi_max - xi_min) / dx + 1e-9)) + 1
    xi_grid = xi_min + dx * np.arange(n)

    # Dense resample of the orbit over the covered logit span, then Hermite
    # interpolation of w(xi); nodal derivatives are exact (dw/dxi = q).
    w_cov = _bisect_w(orbit, xi_grid[-1] + dx)
    wf = np.linspace(_W_START, w_cov, max(20001, 8 * n))
    qf, xif, _ = orbit.sol.sol(wf)
    xif = xif - orbit.shift
    spl_w = CubicHermiteSpline(xif, wf, qf)
    w_at = spl_w(xi_grid)
    phi = expit(w_at)
    q_at = spl_w.derivative()(xi_grid)
    phi_prime = q_at * phi * (1.0 - phi)

    if not np.all(np.diff(phi) < 0.0):
        raise RangeError(
            "tabulated values are not strictly decreasing; the requested window "
            "reaches levels indistinguishable from 1 at this spacing",
            suggested_range=suggest_range(nl, c))
    if not phi[0] > 1.0 - 1e-6:
        raise RangeError(
            f"first tabulated value {phi[0]:.9f} <= 1 - 1e-6; widen the window leftward",
            suggested_range=suggest_range(nl, c))
    if not phi[-1] < 1e-6:
        raise RangeError(
            f"last tabulated value {phi[-1]:.3e} >= 1e-6; widen the window rightward",
            suggested_range=suggest_range(nl, c))

    residual = _ode_defect(orbit, nl, w_cov, _W_START - 4.0)
    if residual > tol:
        raise AccuracyError(f"ODE residual {residual:.3e} exceeds tol {tol:.3e}")

    return FrontProfile(
        c=float(orbit.c), lambda_c=float(lam), xi_grid=xi_grid, phi_values=phi,
        phi_prime=phi_prime, is_critical=orbit.is_critical,
        normalization_residual=float(orbit.norm_residual), fprime0=nl.fprime0,
        mu_plus=float(orbit.mu_plus), kappa=float(orbit.kappa),
        ode_residual=float(residual))


def _bisect_w(orbit: _Orbit, xi_target: float) -> float:
    lo, hi = orbit.w_end, _W_START  # xi_norm decreasing in w
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if orbit.xi_norm(mid) > xi_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * max(1.0, abs(lo)):
            break
    return lo


# ---------------------------------------------------------------------------
# Diagnostics and profile-level inequalities.
# ---------------------------------------------------------------------------


@dataclass
class ProfileDiagnostics:
    decay_bound_ok: bool | None
    logderiv_ok: bool
    monotone_ok: bool
    residual: float


def profile_diagnostics(P: FrontProfile, tol: float = 1e-8) -> ProfileDiagnostics:
    """Pointwise inequality checks on the tabulated profile.

    The exponential bound phi <= exp(-lambda*xi) applies only to
    supercritical speeds; for the critical profile that flag is None
    (not applicable).
    """
    ratio = P.phi_prime / P.phi_values
    logderiv_ok = bool(np.all(ratio[1:-1] > -P.lambda_c - tol) and np.all(ratio[1:-1] < tol))
    monotone_ok = bool(np.all(np.diff(P.phi_values) < 0.0))
    if P.is_critical:
        decay = None
    else:
        decay = bool(np.all(P.phi_values * np.exp(P.lambda_c * P.xi_grid) <= 1.0 + tol))
    return ProfileDiagnostics(decay, logderiv_ok, monotone_ok, float(P.ode_residual))


def uniform_decay_constant(nl: Nonlinearity, gamma: float, eps: float,
                           c_grid: Iterable[float], profiles=None) -> float:
    """Smallest abscissa past which phi'_c < -lambda_{gamma+eps} * phi_c
    simultaneously for every speed in ``c_grid``.
    """
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    cstar = nl.critical_speed
    speeds = [float(c) for c in c_grid]
    for c in speeds:
        if not (cstar * (1.0 - 1e-12) <= c <= gamma * (1.0 + 1e-12)):
            raise DomainError(f"c_grid entry {c} outside [{cstar}, {gamma}]")
    lam_ref = decay_rate(gamma + eps, nl.fprime0)
    if profiles is None:
        profiles = ProfileFamily(nl)
    out = -math.inf
    for c in speeds:
        P = profiles.get(c)
        ok = P.phi_prime < -lam_ref * P.phi_values
        if not ok[-1]:
            raise ResolutionError(
                f"inequality unresolved at the right end of the c={c} tabulation; "
                "extend the profile range")
        bad = np.nonzero(~ok)[0]
        a_c = P.xi_grid[0] if bad.size == 0 else P.xi_grid[bad[-1] + 1]
        out = max(out, float(a_c))
    return out


# ---------------------------------------------------------------------------
# Text export / import.
# ---------------------------------------------------------------------------

_HEADER_FIELDS = ("c", "lambda_c", "fprime0", "critical", "mu_plus", "kappa",
                  "normalization_residual", "ode_residual")


def save_profile(P: FrontProfile, path) -> None:
    """Two-column (xi, phi) text export; header carries c, lambda_c, fprime0."""
    vals = (P.c, P.lambda_c, P.fprime0, int(P.is_critical), P.mu_plus, P.kappa,
            P.normalization_residual, P.ode_residual)
    header = "kppfronts-profile " + " ".join(
        f"{k}={v:.17g}" if not isinstance(v, int) else f"{k}={v}"
        for k, v in zip(_HEADER_FIELDS, vals))
    with open(path, "w") as fh:
        fh.write("# " + header + "\n")
        for x, p in zip(P.xi_grid, P.phi_values):
            fh.write(f"{x:.17g} {p:.17g}\n")


def load_profile(path) -> FrontProfile:
    """Reload an exported profile.

    Derivative values are reconstructed from a logit-space spline of the
    stored columns, so derivative-based checks run at interpolation accuracy
    rather than integrator accuracy.
    """
    with open(path) as fh:
        header = fh.readline()
        if "kppfronts-profile" not in header:
            raise InvalidInput(f"{path} is not a profile export")
        meta = dict(tok.split("=", 1) for tok in header.split() if "=" in tok)
        data = np.loadtxt(fh)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 8:
        raise InvalidInput("profile export must hold two columns of at least 8 rows")
    xi, phi = data[:, 0], data[:, 1]
    w = logit(phi)
    q = CubicSpline(xi, w)(xi, 1)
    return FrontProfile(
        c=float(meta["c"]), lambda_c=float(meta["lambda_c"]), xi_grid=xi,
        phi_values=phi, phi_prime=q * phi * (1.0 - phi),
        is_critical=bool(int(meta["critical"])),
        normalization_residual=float(meta["normalization_residual"]),
        fprime0=float(meta["fprime0"]), mu_plus=float(meta["mu_plus"]),
        kappa=float(meta["kappa"]), ode_residual=float(meta["ode_residual"]))


class ProfileFamily:
    """Cache of auto-ranged profiles for one reaction term, keyed by speed.

    Instances are cheap views over an internal dict; profiles are immutable
    so sharing across callers is safe.
    """

    def __init__(self, nl: Nonlinearity, tol: float = 1e-8):
        self.nl = nl
        self.tol = tol
        self._cache: dict[float, FrontProfile] = {}

    def get(self, c: float) -> FrontProfile:
        cstar = self.nl.critical_speed
        key = cstar if abs(c - cstar) <= _CRITICAL_REL_TOL * cstar else round(float(c), 12)
        P = self._cache.get(key)
        if P is None:
            P = solve_profile(self.nl, key, tol=self.tol)
            self._cache[key] = P
        return P

    @property
    def critical(self) -> FrontProfile:
        return self.get(self.nl.critical_speed)

    def __len__(self) -> int:
        return len(self._cache)
