import numpy as np
import pytest

import kppfronts as kf


@pytest.fixture(scope="session")
def logistic():
    return kf.named("logistic")


@pytest.fixture(scope="session")
def family(logistic):
    return kf.ProfileFamily(logistic)


@pytest.fixture(scope="session")
def coarse_two_speed(logistic, family):
    """Shared coarse two-atom run for unit tests (dx=0.1, dt=4e-3)."""
    import kppfronts.pde as pde
    import kppfronts.measures as ms
    import kppfronts.analysis as analysis

    mu = kf.speed_measure(2.0, atoms=[(2.5, 1.0), (4.0, 1.0)])
    base = pde.Grid1D(-150.0, 0.1, 3001)
    bcl, bcr = kf.boundary_clamps(mu, family)
    cfg = pde.SolverConfig(dt=4e-3, window="follow-half-level",
                           bc_left=bcl, bc_right=bcr)
    n = 22.0
    grid = ms.centered_grid(base, ms.scan_front_position(mu, n, family))
    u0 = ms.initial_condition(mu, n, grid, family)
    tracker = analysis.FrontTracker(np.arange(-18.0, 20.0001, 0.25))
    snaps = pde.Observer([-10.0, 0.0, 10.0, 20.0], lambda f: f.copy())
    res = pde.evolve(u0, pde.Coefficients.kpp(logistic), cfg, 20.0,
                     observers=[tracker.observer(), snaps])
    return {
        "mu": mu,
        "trace": tracker.trace(),
        "snapshots": res.records[1],
        "final": res.final,
        "cfg": cfg,
    }
