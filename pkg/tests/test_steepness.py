import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import kppfronts as kf
import kppfronts.pde as pde
import kppfronts.steepness as steep


def field_pair(u_vals, v_vals, dx=0.1):
    g = pde.Grid1D(0.0, dx, len(u_vals))
    return (pde.Field(g, np.asarray(u_vals, float), 0.0),
            pde.Field(g, np.asarray(v_vals, float), 0.0))


class TestSignChanges:
    def test_direct_count(self):
        u, v = field_pair([0.6, 0.2, 0.6], [0.5, 0.5, 0.5])
        assert kf.sign_changes(u, v, dead_band=1e-12) == 2

    def test_identical_fields(self):
        u, v = field_pair([0.3] * 10, [0.3] * 10)
        assert kf.sign_changes(u, v, dead_band=1e-9) == 0

    def test_translates_of_decreasing_profile(self, family):
        P = family.get(2.5)
        g = pde.Grid1D(-30.0, 0.05, 1201)
        u = pde.Field(g, P.value(g.x()), 0.0)
        v = pde.Field(g, P.value(g.x() - 1.0), 0.0)
        assert kf.sign_changes(u, v) == 0

    def test_dead_band_suppresses_noise(self):
        rng = np.random.default_rng(7)
        base = np.linspace(0.9, 0.1, 200)
        noise = 1e-12 * rng.standard_normal(200)
        u, v = field_pair(base, base + noise, dx=0.05)
        assert kf.sign_changes(u, v, dead_band=1e-9) == 0

    @given(vals=arrays(np.float64, 40,
                       elements=st.floats(0.05, 0.95, allow_nan=False)))
    @settings(max_examples=100, deadline=None)
    def test_symmetric(self, vals):
        u, v = field_pair(vals, np.full_like(vals, 0.5))
        assert kf.sign_changes(u, v) == kf.sign_changes(v, u)

    def test_grid_mismatch(self):
        u = pde.Field(pde.Grid1D(0.0, 0.1, 10), np.zeros(10), 0.0)
        v = pde.Field(pde.Grid1D(1.0, 0.1, 10), np.zeros(10), 0.0)
        with pytest.raises(kf.InvalidInput):
            kf.sign_changes(u, v)


class TestIntersectionMonotonicity:
    def test_profile_pair_stays_below_one_crossing(self, logistic, family):
        P2, P3 = family.get(2.0), family.get(3.0)
        g = pde.Grid1D(-50.0, 0.1, 1001)
        u0 = pde.Field(g, P2.value(g.x()), 0.0)
        v0 = pde.Field(g, P3.value(g.x() - 1.0), 0.0)
        res = kf.intersection_monotonicity(
            u0, v0, pde.Coefficients.kpp(logistic),
            pde.SolverConfig(dt=4e-3), np.linspace(0.2, 2.0, 10))
        assert res.nonincreasing
        assert max(res.counts) <= 1

    def test_seeded_perturbations_nonincreasing(self, logistic, family):
        P = family.get(2.5)
        g = pde.Grid1D(-40.0, 0.1, 801)
        x = g.x()
        rng = np.random.default_rng(42)
        co = pde.Coefficients.kpp(logistic)
        cfg = pde.SolverConfig(dt=4e-3)
        for _ in range(3):
            u_vals = P.value(x)
            v_vals = P.value(x - rng.uniform(0.5, 1.5))
            for _ in range(4):
                center = rng.uniform(-12.0, 12.0)
                amp = rng.uniform(-0.3, 0.3)
                bump = np.exp(-((x - center) / rng.uniform(1.0, 3.0)) ** 2)
                v_vals = v_vals + amp * bump * v_vals * (1 - v_vals) * 4.0
            v_vals = np.clip(v_vals, 1e-9, 1 - 1e-9)
            res = kf.intersection_monotonicity(
                pde.Field(g, u_vals, 0.0), pde.Field(g, v_vals, 0.0),
                co, cfg, np.linspace(0.25, 3.0, 12))
            assert res.nonincreasing

    def test_identical_data_all_zero(self, logistic, family):
        P = family.get(2.5)
        g = pde.Grid1D(-30.0, 0.1, 601)
        u0 = pde.Field(g, P.value(g.x()), 0.0)
        res = kf.intersection_monotonicity(
            u0, u0.copy(), pde.Coefficients.kpp(logistic),
            pde.SolverConfig(dt=4e-3), [0.5, 1.0])
        assert res.counts == [0, 0]


class TestSteepnessCheck:
    def test_equality_case_zero_violation(self, family):
        P = family.critical
        g = pde.Grid1D(-35.0, 0.05, 1401)
        f = pde.Field(g, P.value(g.x()), 0.0)
        anchors = steep.anchors_at_levels(f, [0.3, 0.5, 0.7])
        rep = kf.critical_steepest_check(f, P, anchors, 1e-3)
        assert rep.passed
        # zero up to the linear anchor interpolation, O(dx^2 |phi''|)
        assert rep.max_violation_left < 1e-5
        assert rep.max_violation_right < 1e-5

    def test_mismatch_detected(self, family):
        # A fast (flat) profile checked as steeper than a slow one must fail.
        P4, P2 = family.get(4.0), family.get(2.0)
        g = pde.Grid1D(-40.0, 0.05, 1601)
        f = pde.Field(g, P4.value(g.x()), 0.0)
        anchors = steep.anchors_at_levels(f, [0.5])
        rep = kf.steepness_check(f, P2, anchors, steep.STEEPER, 5e-3)
        assert not rep.passed

    def test_consistency_across_reference_speeds(self, coarse_two_speed, family):
        # Passing steeper against a given speed implies passing against any
        # faster (flatter) reference.
        f = [s for s in coarse_two_speed["snapshots"] if s.time == 10.0][0]
        anchors = steep.anchors_at_levels(f, [0.1, 0.3, 0.5, 0.7, 0.9])
        for gamma in (4.0, 5.0, 7.0):
            P = family.get(gamma)
            rep = kf.steepness_check(f, P, anchors, steep.STEEPER,
                                     steep.default_sandwich_tol(P, f.grid.dx))
            assert rep.passed, gamma

    def test_two_speed_run_sandwiches(self, coarse_two_speed, family):
        f = [s for s in coarse_two_speed["snapshots"] if s.time == 10.0][0]
        anchors = steep.anchors_at_levels(f, [0.1, 0.3, 0.5, 0.7, 0.9])
        P4, P25 = family.get(4.0), family.get(2.5)
        up = kf.steepness_check(f, P4, anchors, steep.STEEPER,
                                steep.default_sandwich_tol(P4, f.grid.dx))
        lo = kf.steepness_check(f, P25, anchors, steep.LESS_STEEP,
                                steep.default_sandwich_tol(P25, f.grid.dx))
        assert up.passed and up.slope_ok
        assert lo.passed and lo.slope_ok is None

    def test_critical_steepest_on_run(self, coarse_two_speed, family):
        P = family.critical
        for f in coarse_two_speed["snapshots"]:
            anchors = steep.anchors_at_levels(f, [0.1, 0.5, 0.9])
            rep = kf.critical_steepest_check(
                f, P, anchors, steep.default_sandwich_tol(P, f.grid.dx))
            assert rep.passed

    def test_requires_monotone_field(self, family):
        g = pde.Grid1D(-10.0, 0.1, 201)
        vals = 0.5 + 0.3 * np.sin(g.x())
        f = pde.Field(g, vals, 0.0)
        with pytest.raises(kf.InvalidInput):
            kf.steepness_check(f, family.get(2.5), [0.0], steep.STEEPER, 1e-3)

    def test_requires_critical_profile(self, family):
        g = pde.Grid1D(-30.0, 0.05, 1201)
        P = family.get(2.5)
        f = pde.Field(g, P.value(g.x()), 0.0)
        with pytest.raises(kf.InvalidInput):
            kf.critical_steepest_check(f, P, [0.0], 1e-3)

    def test_bad_direction(self, family):
        g = pde.Grid1D(-30.0, 0.05, 1201)
        P = family.get(2.5)
        f = pde.Field(g, P.value(g.x()), 0.0)
        with pytest.raises(kf.InvalidInput):
            kf.steepness_check(f, P, [0.0], "sideways", 1e-3)
