"""The control map, its adjoint, and the regularized control solves.

The map takes a midpoint-sampled control u to the adjoint state at time
zero, marching the Crank-Nicolson (or Strang) scheme backward from
p(t_f) = 0.  Its adjoint is built as the exact discrete transpose of
that quadrature, so the duality relation underlying the reconstruction
holds to round-off at the discrete level.  The map itself is never
materialized as a matrix: every solver below is matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from .errors import BalanceDivisionError, DimensionError, IllPosedConfigError
from .observation import ObservationOp, apply_c, apply_c_adjoint
from .propagators import Propagator
from .spaces import ControlSignal, Field, TimeGrid, inner_z_signals, norm_x


class ControlMap:
    """Discrete control-to-state map and the machinery to transpose it."""

    def __init__(self, model, obs: ObservationOp, time_grid: TimeGrid):
        if obs.grid != model.grid:
            raise DimensionError("observation and model grids differ")
        self.model = model
        self.obs = obs
        self.time_grid = time_grid
        self.forward = Propagator(model, time_grid, "forward")
        self.adjoint = Propagator(model, time_grid, "adjoint")

    @property
    def grid(self):
        return self.model.grid

    @property
    def n_channels(self) -> int:
        return self.obs.n_sensors

    def signal(self, samples) -> ControlSignal:
        return ControlSignal(self.time_grid, samples)

    # -- core actions -------------------------------------------------------

    def apply_L_values(self, samples: np.ndarray) -> np.ndarray:
        """p(0) of the backward march driven by the control samples."""
        dt = self.time_grid.dt
        p = np.zeros(self.grid.size)
        for k in range(self.time_grid.n_t - 1, -1, -1):
            cu = apply_c_adjoint(self.obs, samples[k]).values
            p = self.adjoint.step_values(p) + dt * self.adjoint.half_source_values(cu)
        return p

    def apply_Lstar_values(self, x: np.ndarray) -> np.ndarray:
        """Midpoint samples of C along the forward trajectory from x,
        averaging adjacent node states (exact transpose of apply_L)."""
        out = np.empty((self.time_grid.n_t, self.n_channels))
        v = x
        for k in range(self.time_grid.n_t):
            vn = self.forward.step_values(v)
            out[k] = apply_c(self.obs, Field(self.grid, 0.5 * (v + vn)))
            v = vn
        return out

    def apply_L(self, u: ControlSignal) -> Field:
        if u.time_grid != self.time_grid or u.n_channels != self.n_channels:
            raise DimensionError("control does not match the map's grids")
        return Field(self.grid, self.apply_L_values(u.samples))

    def apply_Lstar(self, x: Field) -> ControlSignal:
        if x.grid != self.grid:
            raise DimensionError("field grid does not match the map's grid")
        return self.signal(self.apply_Lstar_values(x.values))

    # -- adjoint-state trajectory (variance penalty) ------------------------

    def p_trajectory(self, samples: np.ndarray) -> np.ndarray:
        """All intermediate adjoint states p^k, k = 0..n_t (p^{n_t} = 0)."""
        dt = self.time_grid.dt
        n_t = self.time_grid.n_t
        traj = np.zeros((n_t + 1, self.grid.size))
        p = traj[n_t]
        for k in range(n_t - 1, -1, -1):
            cu = apply_c_adjoint(self.obs, samples[k]).values
            p = self.adjoint.step_values(p) + dt * self.adjoint.half_source_values(cu)
            traj[k] = p
        return traj

    def p_quadratic(self, samples: np.ndarray) -> tuple[float, np.ndarray]:
        """Value and Euclidean gradient of z(u) = integral ||p(t)||_X^2 dt."""
        dt = self.time_grid.dt
        cw = self.grid.cell_weight
        traj = self.p_trajectory(samples)
        value = dt * cw * float(np.sum(traj[:-1] ** 2))
        # grad_j = 2 dt^2 C (I+S)/2 w^j, with w^j = S w^{j-1} + p^j
        grad = np.empty_like(samples)
        w = traj[0].copy()
        for j in range(self.time_grid.n_t):
            if j:
                w = self.forward.step_values(w) + traj[j]
            half = self.forward.half_source_values(w)
            grad[j] = 2.0 * dt * dt * apply_c(self.obs, Field(self.grid, half))
        return value, grad


# ---------------------------------------------------------------------------
# Regularization configuration


PENALTY_KINDS = ("l1", "h1", "l2", "tv", "variance")


@dataclass(frozen=True)
class RegConfig:
    """Penalty weights and solver controls for one control solve."""

    eta_l1: float = 0.0
    eta_h1: float = 0.0
    eta_l2: float = 0.0
    eta_tv: float = 0.0
    eta_variance: float = 0.0
    sigma: float = 1.0  # noise std entering the variance penalty
    tv_eps: float = 1e-8
    max_outer: int = 500
    cg_tol: float = 1e-10
    cg_warm_iters: int = 0  # CG iterations on the quadratic part before prox
    rel_tol: float = 1e-10  # relative objective decrease stopping rule
    accelerated: bool = True
    # balance-principle block
    balance_penalty: str | None = None
    balance_alpha: float = 1.0
    balance_d: float = 0.5
    balance_eta0: float = 1e-12
    balance_rel_tol: float = 1e-3
    balance_max_iters: int = 30

    def __post_init__(self):
        for name in ("eta_l1", "eta_h1", "eta_l2", "eta_tv", "eta_variance"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative")
        if not (0.0 < self.balance_d < 1.0):
            raise ValueError("balance_d must lie in (0,1)")
        if self.balance_penalty is not None and self.balance_penalty not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.balance_penalty!r}")

    def weight(self, kind: str) -> float:
        return getattr(self, f"eta_{kind}")

    def with_weight(self, kind: str, value: float) -> "RegConfig":
        return replace(self, **{f"eta_{kind}": value})


@dataclass
class ControlSolution:
    """Solved control plus residual and diagnostics."""

    u: ControlSignal
    epsilon: float  # ||L u - phi||_X
    penalties: dict
    objective: float
    trace: list
    converged: bool
    method: str

    @property
    def control_norm_z(self) -> float:
        dt = self.u.time_grid.dt
        return float(np.sqrt(dt * np.sum(self.u.samples**2)))


# ---------------------------------------------------------------------------
# Objective pieces (Euclidean parametrization of the midpoint samples)


class _Objective:
    def __init__(self, cmap: ControlMap, phi: Field, cfg: RegConfig):
        self.cmap = cmap
        self.phi = phi
        self.cfg = cfg
        self.dt = cmap.time_grid.dt
        self.cw = cmap.grid.cell_weight

    # unit-weight penalty values, keyed by kind
    def penalty_values(self, u: np.ndarray) -> dict:
        dt, cfg = self.dt, self.cfg
        du = np.diff(u, axis=0)
        vals = {
            "l1": dt * float(np.sum(np.abs(u))),
            "h1": 0.5 / dt * float(np.sum(du**2)),
            "l2": 0.5 * dt * float(np.sum(u**2)),
            "tv": float(np.sum(np.sqrt(du**2 + cfg.tv_eps**2))),
        }
        if cfg.eta_variance > 0 or cfg.balance_penalty == "variance":
            z, _ = self.cmap.p_quadratic(u)
            vals["variance"] = 0.5 * cfg.sigma**2 * z
        else:
            vals["variance"] = 0.0
        return vals

    def fidelity(self, u: np.ndarray, residual: np.ndarray | None = None) -> float:
        if residual is None:
            residual = self.cmap.apply_L_values(u) - self.phi.values
        return 0.5 * self.cw * float(residual @ residual)

    def total(self, u: np.ndarray) -> float:
        vals = self.penalty_values(u)
        return self.fidelity(u) + sum(
            self.cfg.weight(k) * vals[k] for k in PENALTY_KINDS
        )

    def smooth_value_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        """Everything except the L1 term (the smoothed TV counts as smooth)."""
        cfg, dt = self.cfg, self.dt
        r = self.cmap.apply_L_values(u) - self.phi.values
        val = 0.5 * self.cw * float(r @ r)
        # <r, L du>_X = <L* r, du>_Z = dt * (L* r) . du entrywise
        grad = dt * self.cmap.apply_Lstar_values(r)
        du = np.diff(u, axis=0)
        if cfg.eta_h1 > 0:
            val += cfg.eta_h1 * 0.5 / dt * float(np.sum(du**2))
            grad -= cfg.eta_h1 / dt * _div(du)
        if cfg.eta_l2 > 0:
            val += cfg.eta_l2 * 0.5 * dt * float(np.sum(u**2))
            grad += cfg.eta_l2 * dt * u
        if cfg.eta_tv > 0:
            root = np.sqrt(du**2 + cfg.tv_eps**2)
            val += cfg.eta_tv * float(np.sum(root))
            grad -= cfg.eta_tv * _div(du / root)
        if cfg.eta_variance > 0:
            z, zg = self.cmap.p_quadratic(u)
            val += cfg.eta_variance * 0.5 * cfg.sigma**2 * z
            grad += cfg.eta_variance * 0.5 * cfg.sigma**2 * zg
        return val, grad

    def hessian_matvec(self, u: np.ndarray) -> np.ndarray:
        """Apply the quadratic part's Hessian (L1 and TV excluded)."""
        cfg, dt = self.cfg, self.dt
        out = dt * self.cmap.apply_Lstar_values(self.cmap.apply_L_values(u))
        if cfg.eta_h1 > 0:
            out -= cfg.eta_h1 / dt * _div(np.diff(u, axis=0))
        if cfg.eta_l2 > 0:
            out += cfg.eta_l2 * dt * u
        if cfg.eta_variance > 0:
            _, zg = self.cmap.p_quadratic(u)
            out += cfg.eta_variance * 0.5 * cfg.sigma**2 * zg
        return out

    def grad_fidelity_rhs(self) -> np.ndarray:
        return self.dt * self.cmap.apply_Lstar_values(self.phi.values)


def _div(w: np.ndarray) -> np.ndarray:
    """Negative transpose of the forward difference: out_j = w_j - w_{j-1}
    with free ends, shaped one row longer than w."""
    out = np.zeros((w.shape[0] + 1, w.shape[1]))
    out[:-1] += w
    out[1:] -= w
    return out


def _soft_threshold(u: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(u) * np.maximum(np.abs(u) - tau, 0.0)


def _power_iteration(matvec, shape, iters: int = 25, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = matvec(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


# ---------------------------------------------------------------------------
# Solvers


def apply_L(cmap: ControlMap, u: ControlSignal) -> Field:
    return cmap.apply_L(u)


def apply_Lstar(cmap: ControlMap, x: Field) -> ControlSignal:
    return cmap.apply_Lstar(x)


def solve_control(cmap: ControlMap, phi: Field, cfg: RegConfig,
                  u0: np.ndarray | None = None) -> ControlSolution:
    """Approximately minimize the regularized control objective.

    Pure quadratic penalties are solved by conjugate gradient on the
    normal operator; an L1 term switches to proximal-gradient outer
    iterations (monotone accelerated variant) with the quadratic part
    handled by gradient steps of size 1/L-hat.
    """
    if phi.grid != cmap.grid:
        raise DimensionError("target grid does not match the map's grid")
    if all(cfg.weight(k) == 0.0 for k in PENALTY_KINDS):
        raise IllPosedConfigError(
            "all penalty weights are zero; the normal operator may be "
            "rank-deficient - set at least one positive weight"
        )
    obj = _Objective(cmap, phi, cfg)
    shape = (cmap.time_grid.n_t, cmap.n_channels)
    u = np.zeros(shape) if u0 is None else np.array(u0, dtype=float)

    if cfg.eta_l1 == 0.0 and cfg.eta_tv == 0.0:
        u, trace, converged = _solve_cg(obj, shape, u)
        method = "cg"
    else:
        if u0 is None and cfg.cg_warm_iters > 0:
            u = _cg_iterate(obj, shape, u, cfg.cg_warm_iters)
        u, trace, converged = _solve_prox(obj, u)
        method = "prox"

    residual = cmap.apply_L_values(u) - phi.values
    eps = np.sqrt(cmap.grid.cell_weight) * float(np.linalg.norm(residual))
    penalties = obj.penalty_values(u)
    total = obj.fidelity(u, residual) + sum(
        cfg.weight(k) * penalties[k] for k in PENALTY_KINDS
    )
    return ControlSolution(
        u=cmap.signal(u),
        epsilon=eps,
        penalties=penalties,
        objective=total,
        trace=trace,
        converged=converged,
        method=method,
    )


def _cg_iterate(obj: _Objective, shape, u0: np.ndarray, maxiter: int) -> np.ndarray:
    """A fixed number of CG sweeps on the quadratic part of the objective."""
    b = obj.grad_fidelity_rhs().ravel()

    def matvec(x):
        return obj.hessian_matvec(x.reshape(shape)).ravel()

    op = spla.LinearOperator((b.size, b.size), matvec=matvec)
    x, _ = spla.cg(op, b, x0=u0.ravel(), rtol=1e-14, atol=0.0, maxiter=maxiter)
    return x.reshape(shape)


def _solve_cg(obj: _Objective, shape, u0: np.ndarray):
    b = obj.grad_fidelity_rhs().ravel()
    n = b.size

    def matvec(x):
        return obj.hessian_matvec(x.reshape(shape)).ravel()

    op = spla.LinearOperator((n, n), matvec=matvec)
    maxiter = max(obj.cfg.max_outer, 2 * n // max(shape[1], 1))
    x, info = spla.cg(op, b, x0=u0.ravel(), rtol=obj.cfg.cg_tol, atol=0.0,
                      maxiter=maxiter)
    u = x.reshape(shape)
    res = float(np.linalg.norm(matvec(x) - b))
    trace = [_trace_row(obj, 0, u)]
    return u, trace, info == 0


def _solve_prox(obj: _Objective, u0: np.ndarray):
    cfg = obj.cfg
    lip = _power_iteration(obj.hessian_matvec, u0.shape)
    if cfg.eta_tv > 0:
        lip += 4.0 * cfg.eta_tv / cfg.tv_eps  # curvature bound of smoothed TV
    lip = max(lip, 1e-30)
    tau = 1.0 / (1.05 * lip)
    thresh = tau * cfg.eta_l1 * obj.dt

    x = u0.copy()
    fx = obj.total(x)
    y = x.copy()
    t = 1.0
    trace = [_trace_row(obj, 0, x, total=fx)]
    converged = False
    for it in range(1, cfg.max_outer + 1):
        _, gy = obj.smooth_value_grad(y)
        z = _soft_threshold(y - tau * gy, thresh)
        fz = obj.total(z)
        if cfg.accelerated:
            # monotone FISTA: keep the better of the candidate and the
            # previous iterate, but extrapolate along the candidate
            if fz <= fx:
                x_new, fx_new = z, fz
            else:
                x_new, fx_new = x, fx
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            if fz > fx:
                # plain descent safeguard: step from x instead
                _, gx = obj.smooth_value_grad(x)
                z = _soft_threshold(x - tau * gx, thresh)
                fz = obj.total(z)
            x_new, fx_new = z, fz
            y = x_new
        drop = fx - fx_new
        x, fx = x_new, fx_new
        trace.append(_trace_row(obj, it, x, total=fx))
        if drop >= 0.0 and drop <= cfg.rel_tol * max(abs(fx), 1e-300):
            converged = True
            break
    return x, trace, converged


def _trace_row(obj: _Objective, it: int, u: np.ndarray, total=None) -> dict:
    pen = obj.penalty_values(u)
    fid = obj.fidelity(u)
    if total is None:
        total = fid + sum(obj.cfg.weight(k) * pen[k] for k in PENALTY_KINDS)
    row = {"iter": it, "objective": total, "fidelity": fid}
    row.update({k: pen[k] for k in PENALTY_KINDS})
    return row


# ---------------------------------------------------------------------------
# Balance principle


def balance_fixed_point(solve_fn, beta0: float, alpha: float, d: float,
                        eta0: float, rel_tol: float = 1e-3,
                        max_iters: int = 30):
    """Iterate beta_{k+1} = alpha * fidelity^{1-d} / (penalty + eta0).

    solve_fn(beta) must return (fidelity_value, penalty_value, payload).
    Returns (beta, payload, history, converged).
    """
    if beta0 <= 0:
        raise ValueError("beta0 must be positive")
    if not (0.0 < d < 1.0):
        raise ValueError("d must lie in (0,1)")
    beta = beta0
    history = []
    payload = None
    converged = False
    for _ in range(max_iters):
        fid, pen, payload = solve_fn(beta)
        denom = pen + eta0
        if denom <= 0.0:
            raise BalanceDivisionError(
                "penalty + eta0 vanished during the balance update; "
                "use eta0 > 0"
            )
        beta_next = alpha * fid ** (1.0 - d) / denom
        history.append({"beta": beta, "fidelity": fid, "penalty": pen,
                        "beta_next": beta_next})
        if abs(beta_next - beta) <= rel_tol * abs(beta):
            converged = True
            beta = beta_next
            break
        beta = beta_next
    return beta, payload, history, converged


def select_parameters_balance(cmap: ControlMap, phi: Field,
                              cfg: RegConfig) -> tuple[RegConfig, ControlSolution]:
    """Tune the designated penalty weight by the balance fixed point."""
    kind = cfg.balance_penalty
    if kind is None:
        raise ValueError("cfg.balance_penalty must name the tuned penalty")
    beta0 = cfg.weight(kind)
    if beta0 <= 0:
        beta0 = 1.0

    def solve_fn(beta):
        sol = solve_control(cmap, phi, cfg.with_weight(kind, beta))
        return 0.5 * sol.epsilon**2, sol.penalties[kind], sol

    beta, sol, history, converged = balance_fixed_point(
        solve_fn, beta0, cfg.balance_alpha, cfg.balance_d, cfg.balance_eta0,
        cfg.balance_rel_tol, cfg.balance_max_iters,
    )
    final_cfg = cfg.with_weight(kind, beta)
    return final_cfg, sol


# ---------------------------------------------------------------------------
# Observability diagnostic


def observability_min_eig(cmap: ControlMap, basis) -> float:
    """Smallest eigenvalue of L* L restricted to the span of the basis.

    Formed from the m x m Gram of the adjoint signals; diagnostic only.
    """
    signals = [cmap.apply_Lstar(phi) for phi in basis.fields]
    m = len(signals)
    g = np.empty((m, m))
    for j in range(m):
        for k in range(j, m):
            g[j, k] = g[k, j] = inner_z_signals(signals[j], signals[k])
    return float(np.linalg.eigvalsh(g)[0])
