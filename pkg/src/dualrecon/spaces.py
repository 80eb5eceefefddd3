"""Grids, discrete function spaces, inner products and time quadrature.

The spatial domain is the unit interval / unit square with homogeneous
Dirichlet boundaries; only interior nodes are stored.  The discrete inner
products are rectangle-rule quadratures on the interior nodes, which
diagonalize the discrete sine basis exactly and make the discrete adjoint
identities elsewhere in the library hold to round-off.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


def _frozen_array(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform interior grid on [0,1] with implicit zero boundary values."""

    n_interior: int

    def __post_init__(self):
        if self.n_interior < 3:
            raise ValueError("n_interior must be >= 3")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.n_interior + 1) * self.h

    @property
    def size(self) -> int:
        return self.n_interior

    @property
    def cell_weight(self) -> float:
        return self.h


@dataclass(frozen=True)
class Grid2D:
    """Tensor-product interior grid on the unit square, Dirichlet boundary.

    Field values are stored flattened in C order with x the slow index:
    entry ``ix * ny + iy`` holds the value at (x_ix, y_iy).
    """

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("nx, ny must be >= 3")

    @property
    def hx(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def hy(self) -> float:
        return 1.0 / (self.ny + 1)

    @property
    def xs(self) -> np.ndarray:
        return np.arange(1, self.nx + 1) * self.hx

    @property
    def ys(self) -> np.ndarray:
        return np.arange(1, self.ny + 1) * self.hy

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_weight(self) -> float:
        return self.hx * self.hy

    def meshgrid(self):
        """(X, Y) arrays of shape (nx, ny) matching the flattening order."""
        return np.meshgrid(self.xs, self.ys, indexing="ij")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, t_f] with n_t steps."""

    t_f: float
    n_t: int

    def __post_init__(self):
        if self.n_t < 2:
            raise ValueError("n_t must be >= 2")
        if self.t_f <= 0:
            raise ValueError("t_f must be positive")

    @property
    def dt(self) -> float:
        return self.t_f / self.n_t

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_t) + 0.5) * self.dt


@dataclass(frozen=True)
class Field:
    """Values of a state-space element on the interior nodes of a grid."""

    grid: Grid1D | Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = _frozen_array(self.values)
        if v.ndim != 1 or v.shape[0] != self.grid.size:
            raise DimensionError(
                f"field has {v.size} values, grid holds {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @staticmethod
    def zeros(grid) -> "Field":
        return Field(grid, np.zeros(grid.size))


@dataclass(frozen=True)
class ControlSignal:
    """Per-midpoint sensor-channel samples of a control u in L2(0,t_f;Y)."""

    time_grid: TimeGrid
    samples: np.ndarray  # shape (n_t, n_channels)

    def __post_init__(self):
        s = _frozen_array(self.samples)
        if s.ndim != 2 or s.shape[0] != self.time_grid.n_t:
            raise DimensionError(
                f"expected {self.time_grid.n_t} midpoint samples, got {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise ValueError("control samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class MeasurementSeries:
    """Per-node sensor-channel samples of an observation series y(t)."""

    time_grid: TimeGrid
    samples: np.ndarray  # shape (n_t + 1, n_channels)

    def __post_init__(self):
        s = _frozen_array(self.samples)
        if s.ndim != 2 or s.shape[0] != self.time_grid.n_t + 1:
            raise DimensionError(
                f"expected {self.time_grid.n_t + 1} node samples, got {s.shape}"
            )
        object.__setattr__(self, "samples", s)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def node_averages(self) -> np.ndarray:
        """Adjacent-node averages (w_k + w_{k+1})/2, shape (n_t, n_channels)."""
        return 0.5 * (self.samples[:-1] + self.samples[1:])


def inner_x(a: Field, b: Field) -> float:
    """Discrete L2 inner product over the interior nodes."""
    if a.grid != b.grid:
        raise DimensionError("fields live on different grids")
    return a.grid.cell_weight * float(a.values @ b.values)


def norm_x(a: Field) -> float:
    return np.sqrt(max(inner_x(a, a), 0.0))


def inner_z(u: ControlSignal, w: MeasurementSeries) -> float:
    """Midpoint-in-time quadrature of the L2(0,t_f;Y) pairing.

    Pairs the midpoint control samples with adjacent-node averages of the
    series: dt * sum_k <u_{k+1/2}, (w_k + w_{k+1})/2>_Y.
    """
    if u.time_grid != w.time_grid:
        raise DimensionError("signal and series live on different time grids")
    if u.n_channels != w.n_channels:
        raise DimensionError("channel counts differ")
    return u.time_grid.dt * float(np.sum(u.samples * w.node_averages()))


def inner_z_signals(u: ControlSignal, v: ControlSignal) -> float:
    """Z inner product of two midpoint-sampled signals."""
    if u.time_grid != v.time_grid or u.n_channels != v.n_channels:
        raise DimensionError("signals are incompatible")
    return u.time_grid.dt * float(np.sum(u.samples * v.samples))


def norm_z(u: ControlSignal) -> float:
    return np.sqrt(max(inner_z_signals(u, u), 0.0))


# ---------------------------------------------------------------------------
# CSV serialization (17 significant digits round-trips float64 exactly)

_FMT = "%.17g"


def save_field_csv(path, f: Field) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(f.grid, Grid1D):
            w.writerow(["x", "value"])
            for x, v in zip(f.grid.nodes, f.values):
                w.writerow([_FMT % x, _FMT % v])
        else:
            w.writerow(["x", "y", "value"])
            vals = f.values.reshape(f.grid.nx, f.grid.ny)
            for ix, x in enumerate(f.grid.xs):
                for iy, y in enumerate(f.grid.ys):
                    w.writerow([_FMT % x, _FMT % y, _FMT % vals[ix, iy]])


def load_field_csv(path, grid) -> Field:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    values = np.atleast_2d(data)[:, -1]
    return Field(grid, values)


def _save_timetable(path, times, samples) -> None:
    n_ch = samples.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"ch{j}" for j in range(n_ch)])
        for t, row in zip(times, samples):
            w.writerow([_FMT % t] + [_FMT % v for v in row])


def save_series_csv(path, y: MeasurementSeries) -> None:
    _save_timetable(path, y.time_grid.nodes, y.samples)


def load_series_csv(path, time_grid: TimeGrid) -> MeasurementSeries:
    data = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1))
    return MeasurementSeries(time_grid, data[:, 1:])


def save_signal_csv(path, u: ControlSignal) -> None:
    _save_timetable(path, u.time_grid.midpoints, u.samples)


def load_signal_csv(path, time_grid: TimeGrid) -> ControlSignal:
    data = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1))
    return ControlSignal(time_grid, data[:, 1:])
