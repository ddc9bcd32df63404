"""Semi-implicit time integration of u_t = a(t,x) u_xx + b(t,x) u_x + f(t,x,u).

One step is a Strang composition: half a reaction step (explicit midpoint
rule on u' = f), a Crank-Nicolson centered-difference solve for diffusion
and advection over the full step, then the second reaction half.  Every
sub-map preserves [0, 1] and ordering as long as dt * sup|df/du| <= 0.5,
the cell ratio a dt / dx^2 stays <= 1, and the cell Peclet number
|b| dx / (2a) stays <= 1 (all enforced), so the discrete comparison
principle holds up to rounding while the traveling-front transport error
is second order in both dx and dt.  The homogeneous case a = 1, b = 0,
f = f(u) is the default and reuses cached constant bands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    ConfigError,
    InvalidInput,
    NotBracketedError,
    NumericError,
    TrackingLostError,
)
from .nonlinearity import Nonlinearity

_VALUE_SLACK = 1e-12


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid x0 + i*dx, i = 0..n-1."""

    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.x0) and np.isfinite(self.dx) and self.dx > 0):
            raise InvalidInput(f"grid needs finite x0 and dx > 0, got {self}")
        if self.n < 3:
            raise InvalidInput(f"grid needs n >= 3 points, got {self.n}")

    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def x_last(self) -> float:
        return self.x0 + self.dx * (self.n - 1)

    def shifted(self, cells: int) -> "Grid1D":
        return Grid1D(self.x0 + cells * self.dx, self.dx, self.n)

    def aligned_with(self, other: "Grid1D") -> bool:
        if abs(self.dx - other.dx) > 1e-14 * self.dx:
            return False
        off = (other.x0 - self.x0) / self.dx
        return abs(off - round(off)) < 1e-8


@dataclass(frozen=True, eq=False)
class Field:
    """One time slice of the solution on a grid; values stay in [0, 1]."""

    grid: Grid1D
    values: np.ndarray
    time: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.grid.n,):
            raise InvalidInput(f"values shape {v.shape} does not match grid n={self.grid.n}")

    def validate(self) -> None:
        v = self.values
        if not np.all(np.isfinite(v)):
            raise InvalidInput("field contains non-finite values")
        if v.min() < -_VALUE_SLACK or v.max() > 1.0 + _VALUE_SLACK:
            raise InvalidInput(
                f"field values [{v.min():.3e}, {v.max():.3e}] leave [0,1] beyond slack")

    def x(self) -> np.ndarray:
        return self.grid.x()

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time)


def _as_coeff_fn(value) -> Callable[[float, np.ndarray], np.ndarray]:
    if callable(value):
        return value
    const = float(value)

    def fn(t, x):
        return np.full_like(x, const)

    return fn


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Equation coefficients; ``a`` must stay positive and both a, b bounded."""

    a: object = 1.0                      # float or (t, x) -> array
    b: object = 0.0                      # float or (t, x) -> array
    reaction: Callable = None            # (t, x, u) -> array
    homogeneous: bool = True
    reaction_slope: float = 1.0          # sup over [0,1] of |d reaction/du|

    @staticmethod
    def kpp(nl: Nonlinearity) -> "Coefficients":
        """Homogeneous diffusion with a state-only reaction term."""

        def reaction(t, x, u):
            return nl.f(u)

        return Coefficients(a=1.0, b=0.0, reaction=reaction, homogeneous=True,
                            reaction_slope=nl.slope_bound())

    @staticmethod
    def heterogeneous(a, b, reaction, reaction_slope: float) -> "Coefficients":
        return Coefficients(a=a, b=b, reaction=reaction, homogeneous=False,
                            reaction_slope=float(reaction_slope))

    def constant_linear_part(self) -> bool:
        return not callable(self.a) and not callable(self.b)


@dataclass(frozen=True)
class SolverConfig:
    """Time step, boundary policy, and window policy.

    ``boundary`` is a label; the actual clamp values come from ``bc_left`` /
    ``bc_right`` callables (t, x) -> value.  When a callable is absent the
    endpoint simply holds its current value, which keeps the equilibria 0
    and 1 exact and acts as Dirichlet data matching the initial condition.
    ``window`` is "fixed" or "follow-half-level"; the moving window shifts
    by whole cells only and refills entered cells from the boundary policy
    (or the edge value when the policy holds).
    """

    dt: float
    boundary: str = "hold"
    window: str = "fixed"
    margin: float = 40.0
    bc_left: Callable = None
    bc_right: Callable = None

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.window not in ("fixed", "follow-half-level"):
            raise ConfigError(f"unknown window policy {self.window!r}")

    def left_value(self, t: float, x: float, held: float) -> float:
        return held if self.bc_left is None else float(self.bc_left(t, x))

    def right_value(self, t: float, x: float, held: float) -> float:
        return held if self.bc_right is None else float(self.bc_right(t, x))


def default_dt(dx: float) -> float:
    """Default step 0.25*dx^2, capped at 1e-2."""
    return min(0.25 * dx * dx, 1e-2)


class _Stepper:
    """Reusable machinery for one (coefficients, config, grid shape) triple."""

    def __init__(self, co: Coefficients, cfg: SolverConfig, grid: Grid1D):
        if cfg.dt * co.reaction_slope > 0.5 + 1e-12:
            raise ConfigError(
                f"dt = {cfg.dt} violates dt * reaction slope bound "
                f"({co.reaction_slope:.3g}) <= 0.5")
        self.co = co
        self.cfg = cfg
        self.n = grid.n
        self.dx = grid.dx
        self._a_fn = _as_coeff_fn(co.a)
        self._b_fn = _as_coeff_fn(co.b)
        self._const = co.constant_linear_part()
        self._band = None
        self._band_dt = None

    def _linear_parts(self, t_new: float, x: np.ndarray, dt: float):
        """Implicit band of I - (dt/2) L and the coefficients of I + (dt/2) L."""
        if self._const and self._band is not None and self._band_dt == dt:
            return self._band
        a = self._a_fn(t_new, x)
        b = self._b_fn(t_new, x)
        if np.any(a <= 0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NumericError("diffusion coefficient must be positive and bounded")
        peclet = np.max(np.abs(b) * self.dx / (2.0 * a))
        if peclet > 1.0 + 1e-12:
            raise ConfigError(
                f"cell Peclet number {peclet:.3g} > 1; reduce dx to keep the "
                "scheme monotone")
        ratio = np.max(a) * dt / self.dx ** 2
        if ratio > 1.0 + 1e-12:
            raise ConfigError(
                f"cell ratio a*dt/dx^2 = {ratio:.3g} > 1 breaks monotonicity; "
                "reduce dt")
        r = 0.5 * dt * a / self.dx ** 2
        s = 0.5 * dt * b / (2.0 * self.dx)
        ab = np.zeros((3, self.n))
        ab[1, :] = 1.0
        ab[1, 1:-1] = 1.0 + 2.0 * r[1:-1]
        ab[0, 2:] = -(r[1:-1] + s[1:-1])      # A[i, i+1] stored at column i+1
        ab[2, 0:self.n - 2] = -(r[1:-1] - s[1:-1])  # A[i, i-1] stored at column i-1
        parts = (ab, r, s)
        if self._const:
            self._band = parts
            self._band_dt = dt
        return parts

    def _react_half(self, t: float, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
        if self.co.reaction is None:
            return u
        h = 0.5 * dt
        mid = u + 0.5 * h * self.co.reaction(t, x, u)
        return u + h * self.co.reaction(t, x, mid)

    def advance(self, u: np.ndarray, t: float, x: np.ndarray, dt: float) -> np.ndarray:
        t_new = t + dt
        bl = self.cfg.left_value(t_new, x[0], u[0])
        br = self.cfg.right_value(t_new, x[-1], u[-1])
        v = self._react_half(t, x, u, dt)
        ab, r, s = self._linear_parts(t_new, x, dt)
        rhs = v.copy()
        rhs[1:-1] += (r[1:-1] * (v[2:] - 2.0 * v[1:-1] + v[:-2])
                      + s[1:-1] * (v[2:] - v[:-2]))
        rhs[0] = bl
        rhs[-1] = br
        # Residual-correction form: exact for constant states (row sums 1).
        m_rhs = ab[1, :] * rhs
        m_rhs[:-1] += ab[0, 1:] * rhs[1:]
        m_rhs[1:] += ab[2, :-1] * rhs[:-1]
        delta = solve_banded((1, 1), ab, rhs - m_rhs, check_finite=False)
        w = rhs + delta
        if not np.all(np.isfinite(w)):
            raise NumericError("tridiagonal solve produced non-finite values")
        w = self._react_half(t_new, x, w, dt)
        w[0] = bl
        w[-1] = br
        return w


def step(u: Field, co: Coefficients, cfg: SolverConfig) -> Field:
    """One semi-implicit step of length cfg.dt; deterministic."""
    u.validate()
    stepper = _Stepper(co, cfg, u.grid)
    values = stepper.advance(u.values.copy(), u.time, u.x(), cfg.dt)
    out = Field(u.grid, values, u.time + cfg.dt)
    out.validate()
    return out


@dataclass(eq=False)
class Observer:
    """Callback invoked at the requested times with interpolated fields."""

    times: Sequence[float]
    fn: Callable[[Field], object]

    def __post_init__(self):
        self.times = np.sort(np.asarray(self.times, dtype=float))


@dataclass(eq=False)
class EvolveResult:
    final: Field
    records: list
    n_steps: int
    total_shift_cells: int


def _half_level_position(values: np.ndarray, x: np.ndarray, level: float = 0.5):
    d = values - level
    sign_change = np.nonzero(d[:-1] * d[1:] <= 0.0)[0]
    hits = sign_change[(d[sign_change] != 0.0) | (d[sign_change + 1] != 0.0)]
    if hits.size == 0:
        return None
    i = int(hits[0])
    denom = d[i] - d[i + 1]
    frac = d[i] / denom if denom != 0.0 else 0.0
    return float(x[i] + frac * (x[i + 1] - x[i]))


def evolve(u0: Field, co: Coefficients, cfg: SolverConfig, t_end: float,
           observers: Sequence[Observer] = ()) -> EvolveResult:
    """March ``u0`` to ``t_end``, applying the window policy and observers.

    Observers get linear-in-time interpolated fields at exactly their
    requested times.  With the follow-half-level window the grid shifts by
    whole cells to keep the u = 1/2 crossing centered; losing that crossing
    raises TrackingLostError.
    """
    if not t_end > u0.time:
        raise InvalidInput(f"t_end = {t_end} must exceed the initial time {u0.time}")
    u0.validate()
    stepper = _Stepper(co, cfg, u0.grid)
    grid = u0.grid
    x = grid.x()
    u = u0.values.copy()
    t = u0.time
    follow = cfg.window == "follow-half-level"
    records = [[] for _ in observers]
    pointers = [0 for _ in observers]
    n_steps = 0
    total_shift = 0
    center = 0.5 * (x[0] + x[-1])
    t0 = t
    # Event slack must cover the multiplicative rounding of t0 + k*dt.
    slack = 1e-9 * max(1.0, abs(t_end), abs(t0))

    while t < t_end - slack:
        dt = min(cfg.dt, t_end - t)
        u_new = stepper.advance(u.copy(), t, x, dt)
        n_steps += 1
        t_new = t0 + n_steps * cfg.dt if dt == cfg.dt else t_end
        for k, obs in enumerate(observers):
            while pointers[k] < len(obs.times) and obs.times[pointers[k]] <= t_new + slack:
                tau = obs.times[pointers[k]]
                if tau >= t - slack:
                    frac = 0.0 if dt == 0 else np.clip((tau - t) / dt, 0.0, 1.0)
                    snap = Field(grid, (1.0 - frac) * u + frac * u_new, float(tau))
                    records[k].append(obs.fn(snap))
                pointers[k] += 1
        u, t = u_new, t_new
        if follow:
            pos = _half_level_position(u, x)
            if pos is None:
                raise TrackingLostError(
                    f"half-level crossing left the window at t = {t:.6g}")
            drift = pos - center
            if abs(drift) >= grid.dx:
                cells = int(round(drift / grid.dx))
                u = _shift_values(u, cells, cfg, t, grid, x)
                grid = grid.shifted(cells)
                x = grid.x()
                center = 0.5 * (x[0] + x[-1])
                total_shift += cells

    final = Field(grid, u, t)
    final.validate()
    return EvolveResult(final=final, records=records, n_steps=n_steps,
                        total_shift_cells=total_shift)


def _shift_values(u: np.ndarray, cells: int, cfg: SolverConfig, t: float,
                  grid: Grid1D, x_old: np.ndarray) -> np.ndarray:
    n = u.size
    out = np.empty_like(u)
    if cells > 0:       # window moves right; new cells enter on the right
        out[: n - cells] = u[cells:]
        new_x = x_old[-1] + grid.dx * np.arange(1, cells + 1)
        out[n - cells:] = [cfg.right_value(t, xx, u[-1]) for xx in new_x]
    elif cells < 0:     # window moves left
        k = -cells
        out[k:] = u[: n - k]
        new_x = x_old[0] - grid.dx * np.arange(k, 0, -1)
        out[:k] = [cfg.left_value(t, xx, u[0]) for xx in new_x]
    else:
        out[:] = u
    return out


@dataclass
class ComparisonReport:
    ordered_initially: bool
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.ordered_initially and self.max_violation <= self.tolerance


def comparison_check(u0: Field, v0: Field, co: Coefficients, cfg: SolverConfig,
                     t_end: float) -> ComparisonReport:
    """Evolve an ordered pair and report the worst order violation (u - v)+.

    Runs on a fixed window regardless of cfg.window, since the two solutions
    must stay on one grid to be compared pointwise.
    """
    if u0.grid != v0.grid:
        raise InvalidInput("comparison_check requires a common grid")
    if abs(u0.time - v0.time) > 1e-12:
        raise InvalidInput("comparison_check requires a common initial time")
    u0.validate()
    v0.validate()
    ordered = bool(np.all(u0.values <= v0.values + _VALUE_SLACK))
    stepper = _Stepper(co, cfg, u0.grid)
    x = u0.grid.x()
    u = u0.values.copy()
    v = v0.values.copy()
    t0 = t = u0.time
    k = 0
    worst = float(np.max(u0.values - v0.values)) if ordered else float("nan")
    slack = 1e-9 * max(1.0, abs(t_end), abs(t0))
    while t < t_end - slack:
        dt = min(cfg.dt, t_end - t)
        u = stepper.advance(u, t, x, dt)
        v = stepper.advance(v, t, x, dt)
        k += 1
        t = t0 + k * cfg.dt if dt == cfg.dt else t_end
        if ordered:
            worst = max(worst, float(np.max(u - v)))
    tolerance = 1e-6 + 10.0 * u0.grid.dx ** 2
    return ComparisonReport(ordered_initially=ordered,
                            max_violation=max(worst, 0.0) if ordered else float("nan"),
                            tolerance=tolerance)


def save_field(field: Field, path) -> None:
    """Checkpoint: header (time, x0, dx, n) then one value per line."""
    with open(path, "w") as fh:
        fh.write(f"# kppfronts-field time={field.time:.17g} x0={field.grid.x0:.17g} "
                 f"dx={field.grid.dx:.17g} n={field.grid.n}\n")
        for v in field.values:
            fh.write(f"{v:.17g}\n")


def load_field(path) -> Field:
    with open(path) as fh:
        header = fh.readline()
        if "kppfronts-field" not in header:
            raise InvalidInput(f"{path} is not a field checkpoint")
        meta = dict(tok.split("=", 1) for tok in header.split() if "=" in tok)
        values = np.loadtxt(fh)
    grid = Grid1D(float(meta["x0"]), float(meta["dx"]), int(meta["n"]))
    return Field(grid, values, float(meta["time"]))
