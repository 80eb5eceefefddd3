"""Reconstruction of the initial or final state from solved controls.

Three routes: the dual method for x_0, the dual method for the final
state, and the Gram-matrix variation that expands in the adjoint states
of a chosen control basis.  All attach the per-coefficient error budget
epsilon_k ||x_0|| + delta sqrt(t_f) ||u_k||_Z.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bases import Basis
from .control import ControlMap, ControlSolution, RegConfig, solve_control
from .errors import DimensionError
from .spaces import (
    ControlSignal,
    Field,
    MeasurementSeries,
    inner_x,
    inner_z,
    norm_x,
)

# control solves with residuals above this are flagged unreliable downstream
EPSILON_RELIABLE_MAX = 0.5


@dataclass
class ReconstructionResult:
    coefficients: np.ndarray
    field: Field
    epsilons: np.ndarray
    control_norms: np.ndarray
    reliable: np.ndarray
    error_budget: float
    method: str
    extras: dict = field(default_factory=dict)

    def summary(self, truth: Field | None = None) -> dict:
        out = {
            "method": self.method,
            "m": int(len(self.coefficients)),
            "coefficients": [float(c) for c in self.coefficients],
            "epsilons": [float(e) for e in self.epsilons],
            "control_norms": [float(n) for n in self.control_norms],
            "reliable": [bool(r) for r in self.reliable],
            "budget": float(self.error_budget),
        }
        if truth is not None:
            diff = Field(truth.grid, self.field.values - truth.values)
            denom = norm_x(truth)
            out["rel_error_if_truth_known"] = (
                float(norm_x(diff) / denom) if denom > 0 else float(norm_x(diff))
            )
        return out

    def save_summary(self, path, truth: Field | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(truth), fh, indent=2)


def error_budget(epsilons, control_norms, delta: float, t_f: float,
                 x_norm_est: float) -> float:
    """Sum_k (eps_k * ||x0|| + delta sqrt(t_f) ||u_k||_Z).

    The noise constant is the Cauchy-Schwarz one: if every noise sample
    has Y-norm at most delta, the data term is bounded by
    delta sqrt(t_f) ||u_k||_Z.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    eps = np.asarray(epsilons, dtype=float)
    nrm = np.asarray(control_norms, dtype=float)
    return float(np.sum(eps * x_norm_est + delta * np.sqrt(t_f) * nrm))


def _data_series(y: MeasurementSeries, xi: MeasurementSeries, sign: float):
    if y.time_grid != xi.time_grid or y.n_channels != xi.n_channels:
        raise DimensionError("measurement and source-response series differ")
    return MeasurementSeries(y.time_grid, sign * (y.samples - xi.samples))


def _assemble_result(basis: Basis, controls, data: MeasurementSeries,
                     delta: float, method: str) -> ReconstructionResult:
    if len(basis) != len(controls):
        raise DimensionError(
            f"{len(basis)} basis vectors but {len(controls)} controls"
        )
    coeffs = np.array([inner_z(sol.u, data) for sol in controls])
    eps = np.array([sol.epsilon for sol in controls])
    nrm = np.array([sol.control_norm_z for sol in controls])
    reliable = eps <= EPSILON_RELIABLE_MAX
    assembled = basis.assemble(coeffs)
    budget = error_budget(eps, nrm, delta, data.time_grid.t_f,
                          x_norm_est=norm_x(assembled))
    return ReconstructionResult(
        coefficients=coeffs,
        field=assembled,
        epsilons=eps,
        control_norms=nrm,
        reliable=reliable,
        error_budget=budget,
        method=method,
    )


def reconstruct_initial(basis: Basis, controls: list[ControlSolution],
                        y: MeasurementSeries, xi: MeasurementSeries,
                        delta: float = 0.0) -> ReconstructionResult:
    """Dual method: alpha_k = <u_k, y - xi>_Z with L u_k ~ phi_k."""
    data = _data_series(y, xi, sign=+1.0)
    return _assemble_result(basis, controls, data, delta, "dual_initial")


def final_state_targets(cmap: ControlMap, basis: Basis) -> list[Field]:
    """Targets -S*_{t_f} phi_k for the forecasting variant, computed by
    marching the adjoint propagator (identical to forward when the model
    is self-adjoint)."""
    targets = []
    for phi in basis.fields:
        v = phi.values
        for _ in range(cmap.time_grid.n_t):
            v = cmap.adjoint.step_values(v)
        targets.append(Field(cmap.grid, -v))
    return targets


def reconstruct_final(basis: Basis, cmap: ControlMap, cfg: RegConfig,
                      y: MeasurementSeries, xi: MeasurementSeries,
                      delta: float = 0.0,
                      controls: list[ControlSolution] | None = None
                      ) -> ReconstructionResult:
    """Forecasting variant: solve L u_k = -S*_{t_f} phi_k, then
    alpha_k = <u_k, xi - y>_Z (note the sign flip vs the x_0 method)."""
    if controls is None:
        controls = [
            solve_control(cmap, target, cfg)
            for target in final_state_targets(cmap, basis)
        ]
    data = _data_series(y, xi, sign=-1.0)
    result = _assemble_result(basis, controls, data, delta, "dual_final")
    return result


def variation_reconstruct(u_basis: list[ControlSignal], cmap: ControlMap,
                          y: MeasurementSeries, xi: MeasurementSeries,
                          ridge: float | None = None,
                          delta: float = 0.0) -> ReconstructionResult:
    """Gram-matrix variant: expand x_0 in the adjoint states p~_k = L u_k.

    Solves (G + ridge I) beta = rhs by Cholesky, with
    G_kl = <p~_k, p~_l>_X and rhs_k = <u_k, y - xi>_Z (the duality
    relation with p(t_f) = 0 gives <x_0, p~_k> = <u_k, y - xi>_Z).
    """
    m = len(u_basis)
    if m == 0:
        raise ValueError("u_basis must be nonempty")
    p_tilde = [cmap.apply_L(u) for u in u_basis]
    g = np.empty((m, m))
    for j in range(m):
        for k in range(j, m):
            g[j, k] = g[k, j] = inner_x(p_tilde[j], p_tilde[k])
    if ridge is None:
        ridge = 1e-10 * float(np.trace(g)) / m
    data = _data_series(y, xi, sign=+1.0)
    rhs = np.array([inner_z(u, data) for u in u_basis])
    gr = g + ridge * np.eye(m)
    cond = np.linalg.cond(gr)
    if cond > 1e12:
        warnings.warn(
            f"Gram matrix condition number {cond:.3g} > 1e12; the control "
            "basis may not be linearly independent", stacklevel=2,
        )
    try:
        chol = scipy.linalg.cho_factor(gr, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"Gram matrix plus ridge {ridge:.3g} is not positive definite; "
            "increase the ridge"
        ) from exc
    beta = scipy.linalg.cho_solve(chol, rhs)
    values = np.zeros(cmap.grid.size)
    for b, p in zip(beta, p_tilde):
        values += b * p.values
    assembled = Field(cmap.grid, values)
    nrm = np.array(
        [np.sqrt(u.time_grid.dt * np.sum(u.samples**2)) for u in u_basis]
    )
    budget = error_budget(np.zeros(m), np.abs(beta) * nrm, delta,
                          y.time_grid.t_f, x_norm_est=norm_x(assembled))
    return ReconstructionResult(
        coefficients=beta,
        field=assembled,
        epsilons=np.zeros(m),
        control_norms=nrm,
        reliable=np.ones(m, dtype=bool),
        error_budget=budget,
        method="variation",
        extras={"gram_cond": float(cond), "ridge": float(ridge)},
    )


def sine_time_control_basis(cmap: ControlMap, n_modes: int) -> list[ControlSignal]:
    """Default control basis for the variation method: per-sensor smooth
    sine-in-time modes sqrt(2) sin(j pi t / t_f), j = 1..n_modes."""
    t = cmap.time_grid.midpoints
    t_f = cmap.time_grid.t_f
    out = []
    for ch in range(cmap.n_channels):
        for j in range(1, n_modes + 1):
            samples = np.zeros((cmap.time_grid.n_t, cmap.n_channels))
            samples[:, ch] = np.sqrt(2.0) * np.sin(j * np.pi * t / t_f)
            out.append(ControlSignal(cmap.time_grid, samples))
    return out
