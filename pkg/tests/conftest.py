import numpy as np
import pytest

import dualrecon as dr


@pytest.fixture(scope="session")
def grid199():
    return dr.Grid1D(199)


@pytest.fixture(scope="session")
def grid49():
    return dr.Grid1D(49)


@pytest.fixture(scope="session")
def small_1d_problem():
    """Shared small 1-D setup: constant diffusion, two interval sensors."""
    grid = dr.Grid1D(49)
    time_grid = dr.TimeGrid(0.5, 40)
    model = dr.DiffusionModel1D(grid, 1.0)
    obs = dr.ObservationOp.from_intervals(grid, [(0.2, 0.4), (0.6, 0.8)])
    cmap = dr.ControlMap(model, obs, time_grid)
    return cmap


@pytest.fixture(scope="session")
def full_sensor_problem():
    """1-D constant diffusion with a single full-domain averaging sensor."""
    grid = dr.Grid1D(99)
    time_grid = dr.TimeGrid(0.5, 60)
    model = dr.DiffusionModel1D(grid, 1.0)
    obs = dr.ObservationOp.from_intervals(grid, [(0.0, 1.0)])
    return dr.ControlMap(model, obs, time_grid)


def rand_field(grid, rng):
    return dr.Field(grid, rng.standard_normal(grid.size))


def rand_signal(cmap, rng):
    return cmap.signal(rng.standard_normal((cmap.time_grid.n_t, cmap.n_channels)))


@pytest.fixture
def rng():
    return np.random.default_rng(42)
