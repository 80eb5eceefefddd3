"""Scikit-learn style facade over the dual reconstruction pipeline.

The estimator treats the measurement series as the sample (X) and the
field coefficients as the learned state.  fit() solves the controls
once for the configured geometry; predict()/transform-free reuse then
costs only the data integrals, so refitting on new measurement
realizations is cheap by design.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .bases import Basis
from .control import ControlMap, RegConfig, solve_control
from .errors import DimensionError
from .observation import ObservationOp
from .reconstruction import (
    final_state_targets,
    reconstruct_final,
    reconstruct_initial,
)
from .spaces import MeasurementSeries, TimeGrid


class DualReconstructor(BaseEstimator):
    """Estimator reconstructing an initial (or final) state from
    measurement series via precomputed dual controls.

    Parameters
    ----------
    model : PDE model (DiffusionModel1D/2D or ConvDiffModel2D)
    sensors : ObservationOp
    time_grid : TimeGrid
    basis : Basis for the reconstructed field
    reg : RegConfig controlling the regularized control solves
    method : 'dual_initial' or 'dual_final'
    """

    def __init__(self, model=None, sensors: ObservationOp = None,
                 time_grid: TimeGrid = None, basis: Basis = None,
                 reg: RegConfig = None, method: str = "dual_initial"):
        self.model = model
        self.sensors = sensors
        self.time_grid = time_grid
        self.basis = basis
        self.reg = reg
        self.method = method

    def _check_ready(self) -> None:
        for name in ("model", "sensors", "time_grid", "basis"):
            if getattr(self, name) is None:
                raise ValueError(f"parameter {name!r} must be set before fit")
        if self.method not in ("dual_initial", "dual_final"):
            raise ValueError("method must be 'dual_initial' or 'dual_final'")

    def fit(self, X=None, y=None) -> "DualReconstructor":
        """Solve the controls for the configured geometry.

        X and y are accepted for interface compatibility and ignored:
        the controls depend only on the operator setup, not the data.
        """
        self._check_ready()
        reg = self.reg if self.reg is not None else RegConfig(eta_l2=1e-8)
        cmap = ControlMap(self.model, self.sensors, self.time_grid)
        if self.method == "dual_final":
            targets = final_state_targets(cmap, self.basis)
        else:
            targets = list(self.basis.fields)
        self.cmap_ = cmap
        self.controls_ = [solve_control(cmap, phi, reg) for phi in targets]
        self.epsilons_ = np.array([sol.epsilon for sol in self.controls_])
        return self

    def predict(self, X: MeasurementSeries, xi: MeasurementSeries = None,
                delta: float = 0.0):
        """Reconstruct the field from a measurement series.

        Returns the reconstructed Field; the full ReconstructionResult
        is kept on `result_`.
        """
        if not hasattr(self, "controls_"):
            raise ValueError("estimator is not fitted; call fit() first")
        if not isinstance(X, MeasurementSeries):
            raise DimensionError("X must be a MeasurementSeries")
        if xi is None:
            samples = np.zeros((self.time_grid.n_t + 1, self.sensors.n_sensors))
            xi = MeasurementSeries(self.time_grid, samples)
        reg = self.reg if self.reg is not None else RegConfig(eta_l2=1e-8)
        if self.method == "dual_final":
            result = reconstruct_final(self.basis, self.cmap_, reg, X, xi,
                                       delta=delta, controls=self.controls_)
        else:
            result = reconstruct_initial(self.basis, self.controls_, X, xi,
                                         delta=delta)
        self.result_ = result
        return result.field

    def score(self, X: MeasurementSeries, y, xi: MeasurementSeries = None) -> float:
        """Negative relative L2 error against a known truth field y."""
        from .spaces import Field, norm_x

        recon = self.predict(X, xi=xi)
        diff = Field(y.grid, recon.values - y.values)
        denom = norm_x(y)
        return -float(norm_x(diff) / denom) if denom > 0 else -float(norm_x(diff))
