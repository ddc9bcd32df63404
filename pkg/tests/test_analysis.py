import math

import numpy as np
import pytest

import kppfronts as kf
import kppfronts.analysis as analysis
import kppfronts.pde as pde


def synthetic_trace(fn, t0=-40.0, t1=40.0, step=0.25, width=10.0):
    t = np.arange(t0, t1 + 1e-9, step)
    X = fn(t)
    positions = {0.1: X + 2.0, 0.5: X, 0.9: X - 2.0}
    return analysis.FrontTrace(t, positions, np.full_like(t, width), (0.1, 0.9))


class TestLevelPosition:
    def test_profile_inverse_oracle(self, family):
        P = family.get(2.5)
        g = pde.Grid1D(-40.0, 0.05, 1601)
        shift = 7.0
        f = pde.Field(g, P.value(g.x() - shift), 0.0)
        expected = shift + P.inverse(0.5)
        assert kf.level_position(f, 0.5) == pytest.approx(expected, abs=0.05)

    def test_constant_field_not_bracketed(self):
        g = pde.Grid1D(-5.0, 0.1, 101)
        f = pde.Field(g, np.full(g.n, 0.3), 0.0)
        with pytest.raises(kf.NotBracketedError):
            kf.level_position(f, 0.5)

    def test_leftmost_crossing_for_two_front_field(self, family):
        P = family.get(2.5)
        g = pde.Grid1D(-60.0, 0.05, 2401)
        x = g.x()
        vals = np.maximum(P.value(x + 30.0), P.value(-(x - 30.0)))
        f = pde.Field(g, vals, 0.0)
        pos = kf.level_position(f, 0.5)
        assert pos == pytest.approx(-30.0 + P.inverse(0.5), abs=0.1)

    def test_level_domain(self, family):
        g = pde.Grid1D(-5.0, 0.1, 101)
        f = pde.Field(g, np.linspace(1.0, 0.0, 101), 0.0)
        with pytest.raises(kf.DomainError):
            kf.level_position(f, 1.2)


class TestInterfaceWidth:
    def test_profile_width_oracle(self, family):
        P = family.get(2.5)
        g = pde.Grid1D(-40.0, 0.05, 1601)
        f = pde.Field(g, P.value(g.x()), 0.0)
        expected = P.inverse(0.1) - P.inverse(0.9)
        assert kf.interface_width(f, 0.1, 0.9) == pytest.approx(expected, abs=0.1)

    def test_empty_set(self):
        g = pde.Grid1D(-5.0, 0.1, 101)
        f = pde.Field(g, np.zeros(g.n), 0.0)
        assert kf.interface_width(f, 0.1, 0.9) == 0.0

    def test_faster_front_is_flatter(self, family):
        # Width comparison via the profile inverses: steeper = narrower.
        P2, P4 = family.get(2.0), family.get(4.0)
        w2 = P2.inverse(0.1) - P2.inverse(0.9)
        w4 = P4.inverse(0.1) - P4.inverse(0.9)
        assert w2 < w4


class TestSpeedEstimates:
    def test_linear_motion(self):
        tr = synthetic_trace(lambda t: 2.5 * t)
        est = kf.speed_estimates(tr)
        assert est.past.slope == pytest.approx(2.5, abs=1e-12)
        assert est.future.slope == pytest.approx(2.5, abs=1e-12)
        assert est.global_fit is not None

    def test_bounded_perturbation_keeps_global(self):
        tr = synthetic_trace(lambda t: 2.0 * t + np.sin(t))
        est = kf.speed_estimates(tr)
        assert est.global_fit is not None
        assert est.global_fit.slope == pytest.approx(2.0, abs=1e-2)

    def test_accelerating_motion_has_no_global(self):
        tr = synthetic_trace(lambda t: np.where(t < 0, 2.5 * t, 4.0 * t))
        est = kf.speed_estimates(tr)
        assert est.past.slope == pytest.approx(2.5, abs=0.05)
        assert est.future.slope == pytest.approx(4.0, abs=0.05)
        assert est.global_fit is None

    def test_insufficient_samples(self):
        tr = synthetic_trace(lambda t: 2.0 * t, t0=-1.0, t1=1.0, step=0.5)
        with pytest.raises(kf.InsufficientDataError):
            kf.speed_estimates(tr)


class TestOscillationBound:
    def test_linear(self):
        tr = synthetic_trace(lambda t: 2.5 * t)
        rep = kf.oscillation_bound(tr, 1.0)
        assert rep.sup_oscillation == pytest.approx(2.5, abs=1e-9)
        assert rep.tail_speed_bound == pytest.approx(2.5, abs=1e-9)

    def test_wavy_bounds(self):
        tr = synthetic_trace(lambda t: 3.0 * t + np.sin(t), step=0.05)
        rep = kf.oscillation_bound(tr, 1.0)
        assert 1.0 <= rep.sup_oscillation <= 5.0

    def test_tau_too_large(self):
        tr = synthetic_trace(lambda t: t, t0=0.0, t1=5.0)
        with pytest.raises(kf.InvalidInput):
            kf.oscillation_bound(tr, 10.0)


class TestTransitionVerdict:
    def test_constant_width_passes(self):
        tr = synthetic_trace(lambda t: 2.5 * t)
        v = kf.is_transition_front(tr, 0.1, 0.9)
        assert v.verdict and abs(v.growth_slope) < 1e-9
        assert v.width_sup == 10.0

    def test_growing_width_fails(self):
        t = np.arange(0.0, 40.0, 0.25)
        tr = analysis.FrontTrace(t, {0.5: 2.0 * t}, 5.0 + 0.5 * t, (0.1, 0.9))
        v = kf.is_transition_front(tr, 0.1, 0.9)
        assert not v.verdict
        assert v.growth_slope == pytest.approx(0.5, abs=1e-6)

    def test_short_horizon_rejected(self):
        tr = synthetic_trace(lambda t: t, t0=0.0, t1=5.0)
        with pytest.raises(kf.InsufficientDataError):
            kf.is_transition_front(tr, 0.1, 0.9)

    def test_level_mismatch_rejected(self):
        tr = synthetic_trace(lambda t: t)
        with pytest.raises(kf.InvalidInput):
            kf.is_transition_front(tr, 0.2, 0.8)


class TestTailDecay:
    def test_synthetic_exponential(self, logistic):
        # u = e^{-x/2} clipped: rate 1/2 predicts speed 1/2 + 2 = 2.5.
        g = pde.Grid1D(0.0, 0.05, 2001)
        f = pde.Field(g, np.minimum(np.exp(-0.5 * g.x()), 1.0), 0.0)
        td = kf.tail_decay_rate(f, logistic.fprime0)
        assert td.lam == pytest.approx(0.5, rel=1e-6)
        assert td.predicted_c_plus == pytest.approx(2.5, rel=1e-6)

    def test_profile_field(self, family, logistic):
        P = family.get(4.0)
        g = pde.Grid1D(-30.0, 0.05, 2401)
        f = pde.Field(g, P.value(g.x()), 0.0)
        td = kf.tail_decay_rate(f, logistic.fprime0)
        lam4 = kf.decay_rate(4.0, 1.0)
        assert td.lam == pytest.approx(lam4, rel=0.02)
        assert td.predicted_c_plus == pytest.approx(4.0, rel=0.03)
        assert not td.low_confidence

    def test_unresolved_tail(self, logistic):
        g = pde.Grid1D(0.0, 0.1, 51)
        f = pde.Field(g, np.linspace(1.0, 0.5, g.n), 0.0)
        with pytest.raises(kf.ResolutionError):
            kf.tail_decay_rate(f, logistic.fprime0)

    def test_critical_rate_flagged_low_confidence(self, family, logistic):
        P = family.critical
        g = pde.Grid1D(-35.0, 0.05, 1601)
        f = pde.Field(g, P.value(g.x()), 0.0)
        td = kf.tail_decay_rate(f, logistic.fprime0, fit_levels=(1e-7, 1e-3))
        assert td.low_confidence or td.out_of_range


class TestProfileConvergence:
    def test_pure_shift(self, family):
        P = family.get(2.5)
        g = pde.Grid1D(-40.0, 0.05, 2401)
        f = pde.Field(g, P.value(g.x() - 13.0), 0.0)
        match = kf.profile_convergence_error(f, P)
        assert match.shift == pytest.approx(13.0, abs=0.02)
        assert match.error <= 2 * g.dx * P.max_slope()

    def test_wrong_profile_detected(self, family):
        P25, P4 = family.get(2.5), family.get(4.0)
        g = pde.Grid1D(-40.0, 0.05, 2401)
        f = pde.Field(g, P25.value(g.x()), 0.0)
        match = kf.profile_convergence_error(f, P4)
        assert match.error > 0.05


class TestTraceCSV:
    def test_roundtrip(self, tmp_path):
        tr = synthetic_trace(lambda t: 2.0 * t + np.sin(t))
        path = tmp_path / "trace.csv"
        kf.write_trace_csv(tr, path)
        back = kf.read_trace_csv(path)
        assert np.array_equal(back.times, tr.times)
        for m in tr.positions:
            assert np.array_equal(back.positions[m], tr.positions[m])
        assert np.array_equal(back.widths, tr.widths)
        assert back.width_levels == tr.width_levels


class TestTrackerIntegration:
    def test_tracker_orders_levels(self, coarse_two_speed):
        tr = coarse_two_speed["trace"]
        # for nonincreasing fields the lower level lies to the right
        ok = tr.positions[0.1] >= tr.positions[0.9]
        assert np.all(ok[np.isfinite(tr.positions[0.1]) & np.isfinite(tr.positions[0.9])])

    def test_two_speed_windows(self, coarse_two_speed):
        est = kf.speed_estimates(coarse_two_speed["trace"])
        assert est.past.slope == pytest.approx(2.5, rel=0.05)
        assert est.future.slope == pytest.approx(4.0, rel=0.05)
        assert est.global_fit is None

    def test_two_speed_tail(self, coarse_two_speed, logistic):
        f0 = [f for f in coarse_two_speed["snapshots"] if f.time == 0.0][0]
        td = kf.tail_decay_rate(f0, logistic.fprime0)
        assert td.lam == pytest.approx(kf.decay_rate(4.0, 1.0), rel=0.05)
        assert td.predicted_c_plus == pytest.approx(4.0, rel=0.05)
