import math

import numpy as np
import pytest

import kppfronts as kf
import kppfronts.measures as ms
import kppfronts.pde as pde

CSTAR = 2.0


def band_measure():
    return ms.measure_from_spec(
        {"pieces": [{"lo": 2.5, "hi": 4.0, "density": {"kind": "const", "value": 1.0}}]},
        CSTAR)


class TestConstruction:
    def test_masses(self):
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, 1.0), (4.0, 0.5)])
        assert mu.total_mass == pytest.approx(1.5)
        assert mu.bulk_mass == pytest.approx(1.5)
        assert mu.mass_at_cstar == 0.0

    def test_critical_atom_excluded_from_bulk(self):
        mu = kf.speed_measure(CSTAR, atoms=[(2.0, 0.7), (3.0, 1.0)])
        assert mu.mass_at_cstar == pytest.approx(0.7)
        assert mu.bulk_mass == pytest.approx(1.0)

    def test_infinity_atom_normalized(self):
        mu = ms.measure_from_spec({"atoms": [[2.5, 1.0], ["inf", 0.3]]}, CSTAR)
        assert mu.mass_at_infinity == pytest.approx(0.3)
        assert mu.bulk_mass == pytest.approx(1.3)  # point at infinity counts

    def test_band_mass_from_quadrature(self):
        mu = band_measure()
        assert mu.total_mass == pytest.approx(1.5, rel=1e-10)

    def test_gap_speed_rejected(self):
        with pytest.raises(kf.InvalidInput):
            kf.speed_measure(CSTAR, atoms=[(1.0, 1.0)])

    def test_gap_density_rejected(self):
        with pytest.raises(kf.InvalidInput):
            kf.speed_measure(CSTAR, pieces=[ms.DensityPiece(
                1.0, 3.0, lambda c: np.ones_like(c))])

    def test_duplicate_atoms_rejected(self):
        with pytest.raises(kf.InvalidInput):
            kf.speed_measure(CSTAR, atoms=[(2.5, 1.0), (2.5, 2.0)])

    def test_zero_mass_rejected(self):
        with pytest.raises(kf.InvalidInput):
            kf.speed_measure(CSTAR, atoms=[(2.5, 0.0)])


class TestSupportAndClassification:
    def test_two_atoms(self):
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, 1.0), (4.0, 1.0)])
        info = kf.support_info(mu)
        assert info.c_minus == 2.5 and info.c_plus == 4.0
        assert info.compact and info.right_only and not info.has_infinity
        cls = kf.classify(mu)
        assert cls.is_transition_front
        assert cls.shift_bounded_past and cls.shift_bounded_future

    def test_band_unbounded_shifts(self):
        cls = kf.classify(band_measure())
        assert cls.is_transition_front
        assert not cls.shift_bounded_past and not cls.shift_bounded_future

    def test_noncompact_density_not_a_front(self):
        mu = ms.measure_from_spec(
            {"pieces": [{"lo": 2.0, "hi": "inf",
                         "density": {"kind": "exp", "rate": 1.0, "origin": 2.0}}]},
            CSTAR)
        info = kf.support_info(mu)
        assert not info.compact
        assert not kf.classify(mu).is_transition_front

    def test_infinity_mass_blocks_right_only(self):
        mu = ms.measure_from_spec({"atoms": [[2.5, 1.0], ["inf", 0.3]]}, CSTAR)
        info = kf.support_info(mu)
        assert info.has_infinity and not info.right_only
        assert not kf.classify(mu).is_transition_front

    def test_left_moving_atom(self):
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, 1.0), (-3.0, 0.5)])
        assert not kf.support_info(mu).right_only


class TestInitialCondition:
    def test_single_atom_is_exact_translate(self, family):
        # A unit atom at speed c seeds exactly phi_c(x + c n); with mass m
        # the shift picks up -c log m.
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, 1.0)])
        grid = pde.Grid1D(-80.0, 0.1, 1201)
        n = 20.0
        g = ms.centered_grid(grid, ms.scan_front_position(mu, n, family))
        u0 = ms.initial_condition(mu, n, g, family)
        exact = family.get(2.5).value(g.x() + 2.5 * n)
        assert np.max(np.abs(u0.values - exact)) < 1e-12
        assert u0.time == -20.0

    def test_mass_shift(self, family):
        m = 0.3
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, m)])
        grid = pde.Grid1D(-80.0, 0.1, 1201)
        n = 10.0
        g = ms.centered_grid(grid, ms.scan_front_position(mu, n, family))
        u0 = ms.initial_condition(mu, n, g, family)
        exact = family.get(2.5).value(g.x() + 2.5 * n - 2.5 * math.log(m))
        assert np.max(np.abs(u0.values - exact)) < 1e-12

    def test_critical_atom_branch(self, family):
        mu = kf.speed_measure(CSTAR, atoms=[(2.0, 1.0)])
        grid = pde.Grid1D(-80.0, 0.1, 1201)
        n = 15.0
        g = ms.centered_grid(grid, ms.scan_front_position(mu, n, family))
        u0 = ms.initial_condition(mu, n, g, family)
        exact = family.critical.value(g.x() + 2.0 * n)
        assert np.max(np.abs(u0.values - exact)) < 1e-12

    def test_right_only_data_nonincreasing(self, family):
        mu = band_measure()
        grid = pde.Grid1D(-100.0, 0.1, 2001)
        g = ms.centered_grid(grid, ms.scan_front_position(mu, 10.0, family))
        u0 = ms.initial_condition(mu, 10.0, g, family)
        assert np.all(np.diff(u0.values) <= 1e-12)

    def test_uncovering_grid_rejected(self, family):
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, 1.0)])
        grid = pde.Grid1D(1000.0, 0.1, 101)
        with pytest.raises(kf.InvalidInput):
            ms.initial_condition(mu, 10.0, grid, family)

    def test_infinity_mass_adds_uniform_floor(self, family, logistic):
        mu = ms.measure_from_spec({"atoms": [[2.5, 1.0], ["inf", 0.5]]}, CSTAR)
        grid = pde.Grid1D(-120.0, 0.1, 1601)
        n = 10.0
        g = ms.centered_grid(grid, ms.scan_front_position(mu, n, family))
        u0 = ms.initial_condition(mu, n, g, family)
        M = mu.bulk_mass
        floor = kf.homogeneous_solution(logistic, -n + math.log(M)) * 0.5 / M
        assert np.all(u0.values >= floor - 1e-15)


class TestSandwichBounds:
    def test_dirac_lower_is_exact_solution(self, family):
        m = 0.3
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, m)])
        x = np.linspace(-30.0, 30.0, 301)
        lo, up = kf.sandwich_bounds(mu, 1.5, x, family)
        exact = family.get(2.5).value(x - 2.5 * 1.5 - 2.5 * math.log(m))
        assert np.max(np.abs(lo - exact)) < 1e-12
        assert np.all(up >= lo - 1e-12)

    def test_limits(self, family):
        mu = band_measure()
        lo_left, up_left = kf.sandwich_bounds(mu, 0.0, -300.0, family)
        lo_right, up_right = kf.sandwich_bounds(mu, 0.0, 400.0, family)
        assert lo_left > 1.0 - 1e-6       # lower envelope -> 1 far left
        assert up_right < 1e-6            # upper envelope -> 0 far right
        assert up_left == 1.0             # clamped

    def test_scalar_and_vector_agree(self, family):
        mu = band_measure()
        lo_s, up_s = kf.sandwich_bounds(mu, 2.0, 5.0, family)
        lo_v, up_v = kf.sandwich_bounds(mu, 2.0, np.array([5.0]), family)
        assert lo_s == lo_v[0] and up_s == up_v[0]

    def test_quadrature_consistency_against_dense_oracle(self, family):
        # Independent oracle: trapezoid rule over a dense lambda grid for
        # the upper-bound kernels of the band measure.
        mu = band_measure()
        fp0 = 1.0
        t, x = 1.0, 12.0
        M = mu.bulk_mass
        lam_hi = kf.decay_rate(2.5, fp0)
        lam_lo = kf.decay_rate(4.0, fp0)
        lam = np.linspace(lam_lo, lam_hi, 20001)
        c = lam + fp0 / lam
        jac = fp0 / lam**2 - 1.0
        kern = np.exp(-lam * (x - c * t - c * math.log(M)))
        oracle = np.trapezoid(kern * jac, lam) / M
        _, up = kf.sandwich_bounds(mu, t, x, family)
        assert up == pytest.approx(min(oracle, 1.0), abs=1e-7)


class TestBoundaryClamps:
    def test_clamp_matches_bounds(self, family):
        mu = band_measure()
        bcl, bcr = kf.boundary_clamps(mu, family)
        for t, x in ((0.0, -150.0), (5.0, -120.0), (5.0, 80.0)):
            lo, up = kf.sandwich_bounds(mu, t, x, family)
            assert bcl(t, x) == pytest.approx(lo, abs=1e-5)
            assert bcr(t, x) == pytest.approx(up, abs=1e-5)


class TestLadder:
    def test_monotone_in_start_index(self, family, logistic):
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, 1.0), (4.0, 1.0)])
        grid = pde.Grid1D(-100.0, 0.1, 2001)
        bcl, bcr = kf.boundary_clamps(mu, family)
        cfg = pde.SolverConfig(dt=4e-3, window="follow-half-level",
                               bc_left=bcl, bc_right=bcr)
        report = kf.approximate_superposition(
            mu, [6.0, 9.0, 12.0], [-2.0, 0.0], grid, cfg, family)
        assert report.monotone_ok
        assert report.sup_differences[0] > report.sup_differences[1]
        assert report.sandwich_violation < 5e-3
        assert len(report.fields) == 2
        assert report.fields[0].time == -2.0

    def test_target_before_start_rejected(self, family):
        mu = kf.speed_measure(CSTAR, atoms=[(2.5, 1.0)])
        grid = pde.Grid1D(-100.0, 0.1, 2001)
        cfg = pde.SolverConfig(dt=4e-3)
        with pytest.raises(kf.InvalidInput):
            kf.approximate_superposition(mu, [5.0], [-6.0], grid, cfg, family)


class TestCriticalAtomPerturbationBound:
    def test_vanishing_critical_atom(self, family, logistic):
        # Adding sigma * (critical atom) raises the solution by at most the
        # critical front shifted by -cstar * log(sigma).
        mu = band_measure()
        sigma = 0.1
        mu_k = kf.speed_measure(CSTAR, atoms=[(CSTAR, sigma)],
                                pieces=mu.density_pieces)
        base = pde.Grid1D(-100.0, 0.1, 2001)
        grid = ms.centered_grid(base, ms.scan_front_position(mu, 8.0, family))
        co = pde.Coefficients.kpp(logistic)

        def run(m):
            bcs = kf.boundary_clamps(m, family)
            cfg = pde.SolverConfig(dt=4e-3, window="fixed",
                                   bc_left=bcs[0], bc_right=bcs[1])
            u0 = ms.initial_condition(m, 8.0, grid, family)
            snaps = pde.Observer([-4.0, 0.0], lambda f: f.copy())
            return pde.evolve(u0, co, cfg, 0.0 + 1e-9, observers=[snaps]).records[0]

        base_fields = run(mu)
        pert_fields = run(mu_k)
        P = family.critical
        for fb, fp in zip(base_fields, pert_fields):
            diff = fp.values - fb.values
            assert diff.min() >= -1e-8
            cap = P.value(fb.x() - CSTAR * fb.time - CSTAR * math.log(sigma))
            assert np.max(diff - cap) <= 5e-3


class TestSpecParsing:
    def test_bad_density_kind(self):
        with pytest.raises(kf.InvalidInput):
            ms.measure_from_spec(
                {"pieces": [{"lo": 2.5, "hi": 4.0, "density": {"kind": "what"}}]},
                CSTAR)

    def test_table_density(self):
        mu = ms.measure_from_spec(
            {"pieces": [{"lo": 2.5, "hi": 4.0,
                         "density": {"kind": "table", "c": [2.5, 3.0, 4.0],
                                     "rho": [1.0, 2.0, 1.0]}}]},
            CSTAR)
        assert 1.5 < mu.total_mass < 3.0

    def test_unknown_atom_string(self):
        with pytest.raises(kf.InvalidInput):
            ms.measure_from_spec({"atoms": [["fast", 1.0]]}, CSTAR)
