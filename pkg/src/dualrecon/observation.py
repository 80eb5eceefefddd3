"""Sensor observation operator, synthetic data, and noise injection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .propagators import Propagator, forward_trajectory
from .spaces import Field, Grid1D, Grid2D, MeasurementSeries


class ObservationOp:
    """Averaging observation operator over a list of sensor regions.

    Regions snap to whole grid cells: each sensor averages the field over
    the interior nodes it covers, so C and its adjoint are exactly dual
    under the discrete quadrature.
    """

    def __init__(self, grid, node_index_sets, regions=None):
        self.grid = grid
        self.node_sets = [np.asarray(ix, dtype=int) for ix in node_index_sets]
        if not self.node_sets:
            raise ValueError("at least one sensor is required")
        for ix in self.node_sets:
            if ix.size == 0:
                raise ValueError("a sensor region covers no grid nodes")
        self.regions = regions

    @classmethod
    def from_intervals(cls, grid: Grid1D, intervals) -> "ObservationOp":
        """1-D sensors averaging over intervals [a_j, b_j] in (0,1)."""
        x = grid.nodes
        sets = []
        for a, b in intervals:
            if not (0.0 <= a < b <= 1.0):
                raise ValueError(f"interval ({a}, {b}) must lie inside [0,1]")
            sets.append(np.nonzero((x >= a) & (x <= b))[0])
        return cls(grid, sets, regions=[tuple(iv) for iv in intervals])

    @classmethod
    def from_boxes(cls, grid: Grid2D, boxes) -> "ObservationOp":
        """2-D sensors averaging over boxes (x0, x1, y0, y1)."""
        xs, ys = grid.xs, grid.ys
        sets = []
        for x0, x1, y0, y1 in boxes:
            if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
                raise ValueError("box must lie inside the unit square")
            mx = (xs >= x0) & (xs <= x1)
            my = (ys >= y0) & (ys <= y1)
            mask = np.outer(mx, my).ravel()
            sets.append(np.nonzero(mask)[0])
        return cls(grid, sets, regions=[tuple(b) for b in boxes])

    @property
    def n_sensors(self) -> int:
        return len(self.node_sets)


def apply_c(op: ObservationOp, v: Field) -> np.ndarray:
    """Per-sensor averages of the field."""
    if v.grid != op.grid:
        raise DimensionError("field grid does not match observation grid")
    return np.array([v.values[ix].mean() for ix in op.node_sets])


def apply_c_adjoint(op: ObservationOp, w) -> Field:
    """The unique field with <C* w, v>_X = <w, C v>_Y for all v."""
    w = np.asarray(w, dtype=float)
    if w.shape != (op.n_sensors,):
        raise DimensionError(f"expected {op.n_sensors} channel values, got {w.shape}")
    out = np.zeros(op.grid.size)
    cw = op.grid.cell_weight
    for wj, ix in zip(w, op.node_sets):
        out[ix] += wj / (len(ix) * cw)
    return Field(op.grid, out)


def simulate_measurements(p: Propagator, op: ObservationOp, x0: Field,
                          f: Field | None = None) -> MeasurementSeries:
    """Clean series y(t_k) = C x(t_k) along the forward trajectory."""
    traj = forward_trajectory(p, x0, f)
    samples = np.stack([apply_c(op, state) for state in traj])
    return MeasurementSeries(p.time_grid, samples)


def compute_xi(p: Propagator, op: ObservationOp, f: Field | None) -> MeasurementSeries:
    """Source response xi(t_k): observations of the zero-initial-state
    trajectory driven by f."""
    x0 = Field.zeros(p.grid)
    if f is None:
        samples = np.zeros((p.time_grid.n_t + 1, op.n_sensors))
        return MeasurementSeries(p.time_grid, samples)
    return simulate_measurements(p, op, x0, f)


def add_noise(y: MeasurementSeries, level: float, seed: int,
              definition: str = "rms") -> tuple[MeasurementSeries, float]:
    """Additive i.i.d. Gaussian noise, per channel.

    The per-channel standard deviation is level times the channel's RMS
    over time (definition='rms') or its max amplitude (definition='max').
    Returns the noisy series and the realized delta = max_k ||e_k||_Y.
    """
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if level == 0:
        return y, 0.0
    clean = y.samples
    if definition == "rms":
        scale = np.sqrt(np.mean(clean**2, axis=0))
    elif definition == "max":
        scale = np.max(np.abs(clean), axis=0)
    else:
        raise ValueError(f"unknown noise definition {definition!r}")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(clean.shape) * (level * scale)
    delta = float(np.max(np.linalg.norm(e, axis=1)))
    return MeasurementSeries(y.time_grid, clean + e), delta
