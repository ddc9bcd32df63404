import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import kppfronts as kf
from kppfronts.nonlinearity import homogeneous_solution


def logistic_f(s):
    s = np.asarray(s, dtype=float)
    return s * (1.0 - s)


def cubic_f(s):
    # s(1-s)(1+0.5s): second differences are strictly negative on [0,1]
    # (f'' = -1 - 3s), so the grid oracle classifies it as concave.
    s = np.asarray(s, dtype=float)
    return s * (1.0 - s) * (1.0 + 0.5 * s)


def wavy_f(s):
    # Sub-tangential but not concave: the sine factor bends f upward near
    # s = 0.25 while keeping f(s) <= s (verified by the grid oracle below).
    s = np.asarray(s, dtype=float)
    return s * (1.0 - s) * (1.0 - 0.45 * np.sin(2.0 * np.pi * s))


class TestValidateKPP:
    def test_logistic_is_concave_for_all_sample_counts(self):
        for n in (16, 33, 64, 256, 1001):
            rep = kf.validate_kpp(logistic_f, 1.0, n_samples=n)
            assert rep.classification == "concave-kpp"

    def test_square_rejected_with_reasons(self):
        rep = kf.validate_kpp(lambda s: np.asarray(s) ** 2, 0.0)
        assert rep.classification is None
        joined = " ".join(rep.failures)
        assert "f(1)" in joined
        assert "fprime0" in joined

    def test_cubic_matches_its_second_difference_oracle(self):
        s = np.linspace(0.0, 1.0, 256)
        v = cubic_f(s)
        second = v[:-2] - 2 * v[1:-1] + v[2:]
        assert np.max(second) < 0.0  # oracle: concave on the grid
        rep = kf.validate_kpp(cubic_f, 1.0)
        assert rep.classification == "concave-kpp"

    def test_wavy_is_sub_tangential_not_concave(self):
        s = np.linspace(0.0, 1.0, 256)
        v = wavy_f(s)
        second = v[:-2] - 2 * v[1:-1] + v[2:]
        assert np.max(second) > 1e-9  # oracle: convex somewhere
        assert np.all(v[1:-1] <= s[1:-1] + 1e-12)
        rep = kf.validate_kpp(wavy_f, 1.0)
        assert rep.classification == "sub-tangential"

    def test_nonfinite_values_rejected(self):
        with pytest.raises(kf.InvalidInput):
            kf.validate_kpp(lambda s: np.where(np.asarray(s) > 0.5, np.nan, s), 1.0)

    def test_too_few_samples_rejected(self):
        with pytest.raises(kf.InvalidInput):
            kf.validate_kpp(logistic_f, 1.0, n_samples=8)

    def test_fprime0_cross_check(self):
        rep = kf.validate_kpp(logistic_f, 1.5)
        assert rep.classification is None
        assert any("fprime0" in msg for msg in rep.failures)


class TestCriticalSpeed:
    @pytest.mark.parametrize("fp0, expected", [(1.0, 2.0), (4.0, 4.0), (0.25, 1.0)])
    def test_closed_form(self, fp0, expected):
        def scaled(s):
            return fp0 * logistic_f(s)

        nl = kf.make_nonlinearity(scaled, fp0)
        assert kf.critical_speed(nl) == pytest.approx(expected, abs=1e-14)


class TestHomogeneousSolution:
    def test_logistic_midpoint(self, logistic):
        # Closed form 1/(1+e^-t) solves u' = u(1-u) with e^t left tail.
        assert homogeneous_solution(logistic, 0.0) == pytest.approx(0.5, abs=1e-9)

    def test_logistic_left_tail(self, logistic):
        val = homogeneous_solution(logistic, -20.0)
        assert val == pytest.approx(math.exp(-20.0), rel=1e-8)

    def test_closed_form_along_axis(self, logistic):
        for t in (-5.0, -1.0, 0.5, 3.0):
            assert homogeneous_solution(logistic, t) == pytest.approx(
                1.0 / (1.0 + math.exp(-t)), abs=1e-9)

    def test_saturation_flag(self, logistic):
        val, saturated = homogeneous_solution(logistic, 60.0, return_flag=True)
        assert saturated
        assert val == pytest.approx(1.0, abs=1e-11)
        assert val < 1.0

    def test_strictly_increasing(self, logistic):
        ts = np.linspace(-30.0, 25.0, 23)
        vals = [homogeneous_solution(logistic, t) for t in ts]
        assert np.all(np.diff(vals) > 0.0)

    def test_general_term_left_asymptotics(self):
        nl = kf.make_nonlinearity(cubic_f, 1.0)
        val = homogeneous_solution(nl, -15.0)
        assert val == pytest.approx(math.exp(-15.0), rel=1e-4)
        assert homogeneous_solution(nl, 5.0) > 0.9


class TestOracleInequalities:
    @given(a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_superadditivity_of_concave_term(self, a, b):
        # f(a) + f(b) >= f(a+b) whenever everything stays inside [0,1].
        if a + b > 1.0:
            return
        f = logistic_f
        assert f(a) + f(b) >= f(a + b) - 1e-12

    @given(m=st.floats(1e-6, 1.0), s=st.floats(0.0, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_scaling_subsolution_inequality(self, m, s):
        # f(m*s) >= m*f(s) for concave f with f(0) = 0.
        f = cubic_f
        assert f(m * s) >= m * f(s) - 1e-12


class TestTableInput:
    def test_tabulated_logistic_roundtrip(self):
        s = np.linspace(0.0, 1.0, 201)
        nl = kf.from_table(s, logistic_f(s), fprime0=1.0)
        assert nl.kind == "concave-kpp"
        probe = np.linspace(0.05, 0.95, 37)
        assert np.max(np.abs(nl.f(probe) - logistic_f(probe))) < 1e-6

    def test_bad_table_rejected(self):
        with pytest.raises(kf.InvalidInput):
            kf.from_table([0.0, 0.5], [0.0, 0.25], fprime0=1.0)

    def test_named_unknown(self):
        with pytest.raises(kf.InvalidInput):
            kf.named("bistable")
