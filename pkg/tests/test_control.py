import numpy as np
import pytest

import dualrecon as dr
from dualrecon.control import balance_fixed_point
from dualrecon.errors import BalanceDivisionError, IllPosedConfigError


def dense_L_matrix(cmap):
    """Materialize the discrete control map column by column (tests only)."""
    n_t, n_ch = cmap.time_grid.n_t, cmap.n_channels
    cols = []
    for k in range(n_t):
        for j in range(n_ch):
            u = np.zeros((n_t, n_ch))
            u[k, j] = 1.0
            cols.append(cmap.apply_L_values(u))
    return np.column_stack(cols)


class TestApplyL:
    def test_zero_control(self, small_1d_problem):
        cmap = small_1d_problem
        u = np.zeros((cmap.time_grid.n_t, cmap.n_channels))
        assert np.all(cmap.apply_L_values(u) == 0.0)

    def test_impulse_last_interval(self, small_1d_problem):
        # one backward step unrolls to dt * (I + S^T)/2 C* u
        cmap = small_1d_problem
        dt = cmap.time_grid.dt
        u = np.zeros((cmap.time_grid.n_t, cmap.n_channels))
        u[-1, 0] = 1.0
        got = cmap.apply_L_values(u)
        cstar = dr.apply_c_adjoint(cmap.obs, [1.0, 0.0]).values
        one_step = dt * cmap.adjoint.half_source_values(cstar)
        # the remaining n_t - 1 backward steps keep smoothing the profile
        for _ in range(cmap.time_grid.n_t - 1):
            one_step = cmap.adjoint.step_values(one_step)
        assert np.linalg.norm(got - one_step) < 1e-10 * np.linalg.norm(one_step)

    def test_constant_control_vs_fine_reference(self, full_sensor_problem):
        # refined-time oracle for p0 = integral of S_s C* 1 ds
        cmap = full_sensor_problem
        u = np.ones((cmap.time_grid.n_t, 1))
        coarse = cmap.apply_L_values(u)
        fine_tg = dr.TimeGrid(cmap.time_grid.t_f, 16 * cmap.time_grid.n_t)
        fine = dr.ControlMap(cmap.model, cmap.obs, fine_tg)
        ref = fine.apply_L_values(np.ones((fine_tg.n_t, 1)))
        rel = np.linalg.norm(coarse - ref) / np.linalg.norm(ref)
        assert rel < 1e-3


class TestApplyLstar:
    def test_zero_field(self, small_1d_problem):
        cmap = small_1d_problem
        out = cmap.apply_Lstar_values(np.zeros(cmap.grid.size))
        assert np.all(out == 0.0)

    def test_analytic_mode_signal(self, full_sensor_problem):
        cmap = full_sensor_problem
        g = cmap.grid
        x = np.sin(np.pi * g.nodes)
        sig = cmap.apply_Lstar_values(x)
        t = cmap.time_grid.midpoints
        expected = np.exp(-np.pi**2 * t) * np.mean(x)
        np.testing.assert_allclose(sig[:, 0], expected, atol=2e-3)

    def test_master_adjoint_identity(self, small_1d_problem):
        cmap = small_1d_problem
        rng = np.random.default_rng(0)
        shape = (cmap.time_grid.n_t, cmap.n_channels)
        for _ in range(100):
            u = rng.standard_normal(shape)
            x = rng.standard_normal(cmap.grid.size)
            us, xf = cmap.signal(u), dr.Field(cmap.grid, x)
            lhs = dr.inner_x(cmap.apply_L(us), xf)
            rhs = dr.inner_z_signals(us, cmap.apply_Lstar(xf))
            assert abs(lhs - rhs) <= 1e-11 * dr.norm_z(us) * dr.norm_x(xf)

    def test_dense_transpose_agreement(self):
        # the adjoint is the exact transpose of L under the quadratures:
        # L^T scaled by the quadrature weights equals the L* matrix
        g = dr.Grid1D(19)
        tg = dr.TimeGrid(0.4, 8)
        cmap = dr.ControlMap(dr.DiffusionModel1D(g, 1.0),
                             dr.ObservationOp.from_intervals(g, [(0.2, 0.7)]), tg)
        L = dense_L_matrix(cmap)
        rows = []
        for i in range(g.size):
            x = np.zeros(g.size)
            x[i] = 1.0
            rows.append(cmap.apply_Lstar_values(x).ravel())
        Lstar = np.column_stack(rows)  # (n_t*n_ch, n_nodes)
        # <L u, x>_X = h x^T L u ; <u, L* x>_Z = dt u^T L* x
        np.testing.assert_allclose(g.cell_weight * L.T, tg.dt * Lstar, atol=1e-14)


class TestSolveControl:
    def test_zero_target(self, small_1d_problem):
        cfg = dr.RegConfig(eta_l2=1e-8)
        sol = dr.solve_control(small_1d_problem, dr.Field.zeros(small_1d_problem.grid), cfg)
        assert sol.epsilon == pytest.approx(0.0, abs=1e-12)
        assert np.all(sol.u.samples == 0.0)

    def test_huge_l1_kills_control(self, small_1d_problem):
        cmap = small_1d_problem
        phi = dr.sine_basis_1d(cmap.grid, 1)[0]
        cfg = dr.RegConfig(eta_l1=1e6, max_outer=5)
        sol = dr.solve_control(cmap, phi, cfg)
        assert np.all(sol.u.samples == 0.0)
        assert sol.epsilon == pytest.approx(dr.norm_x(phi), rel=1e-12)

    def test_all_zero_weights_rejected(self, small_1d_problem):
        with pytest.raises(IllPosedConfigError):
            dr.solve_control(small_1d_problem,
                             dr.Field.zeros(small_1d_problem.grid), dr.RegConfig())

    def test_pure_l2_matches_dense_normal_equations(self):
        # dense oracle on a coarse 21-node grid
        g = dr.Grid1D(21)
        tg = dr.TimeGrid(0.5, 16)
        cmap = dr.ControlMap(dr.DiffusionModel1D(g, 1.0),
                             dr.ObservationOp.from_intervals(g, [(0.3, 0.7)]), tg)
        phi = dr.sine_basis_1d(g, 1)[0]
        eta = 1e-6
        cfg = dr.RegConfig(eta_l2=eta, cg_tol=1e-13)
        sol = dr.solve_control(cmap, phi, cfg)
        L = dense_L_matrix(cmap)
        # objective: 1/2||Lu - phi||_X^2 + eta/2 ||u||_Z^2
        # in Euclidean samples: (h L^T L + eta dt I) u = h L^T phi
        A = g.cell_weight * (L.T @ L) + eta * tg.dt * np.eye(L.shape[1])
        rhs = g.cell_weight * (L.T @ phi.values)
        u_dense = np.linalg.solve(A, rhs).reshape(tg.n_t, 1)
        assert np.max(np.abs(sol.u.samples - u_dense)) < 1e-8

    def test_cg_normal_equation_residual(self, small_1d_problem):
        cmap = small_1d_problem
        phi = dr.sine_basis_1d(cmap.grid, 2)[1]
        eta = 1e-6
        cfg = dr.RegConfig(eta_l2=eta, cg_tol=1e-12)
        sol = dr.solve_control(cmap, phi, cfg)
        u = sol.u.samples
        # residual of (L*L + eta I) u = L* phi under the Z inner product
        lstar_phi = cmap.apply_Lstar_values(phi.values)
        lhs = cmap.apply_Lstar_values(cmap.apply_L_values(u)) + eta * u
        res = np.linalg.norm(lhs - lstar_phi)
        assert res <= 1e-8 * np.linalg.norm(lstar_phi)

    def test_trace_monotone_objective(self, small_1d_problem):
        cmap = small_1d_problem
        phi = dr.sine_basis_1d(cmap.grid, 1)[0]
        cfg = dr.RegConfig(eta_l1=1e-8, eta_h1=1e-10, max_outer=40)
        sol = dr.solve_control(cmap, phi, cfg)
        objs = [row["objective"] for row in sol.trace]
        assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))

    def test_example1_settings_all_targets(self, grid199):
        d = lambda x: 1.0625 - (x - 0.5) ** 4
        cmap = dr.ControlMap(
            dr.DiffusionModel1D(grid199, d),
            dr.ObservationOp.from_intervals(grid199, [(0.23, 0.31), (0.46, 0.53)]),
            dr.TimeGrid(1.0, 200))
        basis = dr.sine_basis_1d(grid199, 8)
        cfg = dr.RegConfig(eta_l1=5e-8, eta_h1=1e-10, max_outer=10)
        sols = [dr.solve_control(cmap, phi, cfg) for phi in basis.fields[:2]]
        for sol in sols:
            assert np.all(np.isfinite(sol.u.samples))
            assert sol.epsilon >= 0.0

    def test_variance_penalty_reduces_adjoint_energy(self, small_1d_problem):
        cmap = small_1d_problem
        phi = dr.sine_basis_1d(cmap.grid, 1)[0]
        base = dr.RegConfig(eta_l2=1e-8)
        with_var = dr.RegConfig(eta_l2=1e-8, eta_variance=1e-4)
        u0 = dr.solve_control(cmap, phi, base).u.samples
        u1 = dr.solve_control(cmap, phi, with_var).u.samples
        e0 = cmap.p_quadratic(u0)[0]
        e1 = cmap.p_quadratic(u1)[0]
        assert e1 < e0

    def test_noise_damping_of_smooth_controls(self, small_1d_problem):
        # Fourier-in-time content of a solved smooth control decays ~ 1/l
        cmap = small_1d_problem
        phi = dr.sine_basis_1d(cmap.grid, 1)[0]
        cfg = dr.RegConfig(eta_l2=1e-8, eta_h1=1e-6)
        sol = dr.solve_control(cmap, phi, cfg)
        t = cmap.time_grid.midpoints
        t_f = cmap.time_grid.t_f
        dt = cmap.time_grid.dt
        mags = []
        for el in (4, 8, 16):
            osc = np.cos(el * np.pi * t / t_f)
            mags.append(abs(dt * np.sum(sol.u.samples[:, 0] * osc)))
        assert mags[1] < mags[0]
        assert mags[2] < mags[0]
        # decay at least ~1/l overall from l=4 to l=16
        assert mags[2] <= mags[0] / 2


class TestBalance:
    # scalar toy: L = 1, phi = 1, penalty psi = u^2/2.  The regularized
    # minimizer of 1/2(u-1)^2 + beta/2 u^2 is u(beta) = 1/(1+beta).
    # With d = 0.75 the update map has an attracting positive fixed point.
    _TOY = dict(alpha=0.163, d=0.75, eta0=1e-12)

    @staticmethod
    def _toy_solve(beta):
        u = 1.0 / (1.0 + beta)
        return 0.5 * (u - 1.0) ** 2, 0.5 * u**2, u

    def test_toy_matches_brute_force(self):
        p = self._TOY
        beta, u, history, converged = balance_fixed_point(
            self._toy_solve, beta0=1.0, alpha=p["alpha"], d=p["d"],
            eta0=p["eta0"], rel_tol=1e-9, max_iters=200)
        assert converged
        # brute-force scan for the fixed point of the update map
        grid = np.linspace(1e-4, 1.0, 1_000_001)
        fid = 0.5 * (1.0 / (1.0 + grid) - 1.0) ** 2
        pen = 0.5 * (1.0 / (1.0 + grid)) ** 2
        updated = p["alpha"] * fid ** (1 - p["d"]) / (pen + p["eta0"])
        best = grid[np.argmin(np.abs(updated - grid))]
        assert abs(beta - best) < 1e-6

    def test_converges_within_30_iterations_at_1e3(self):
        p = self._TOY
        _, _, history, converged = balance_fixed_point(
            self._toy_solve, beta0=1.0, alpha=p["alpha"], d=p["d"],
            eta0=p["eta0"], rel_tol=1e-3, max_iters=30)
        assert converged
        assert len(history) <= 30

    def test_fixed_point_returns_quickly(self):
        p = self._TOY
        calls = []

        def solve_fn(beta):
            calls.append(beta)
            return self._toy_solve(beta)
        # find the fixed point first, then restart exactly there
        beta, *_ = balance_fixed_point(solve_fn, 1.0, p["alpha"], p["d"],
                                       p["eta0"], rel_tol=1e-10, max_iters=500)
        calls.clear()
        _, _, history, converged = balance_fixed_point(
            solve_fn, beta, p["alpha"], p["d"], p["eta0"],
            rel_tol=1e-3, max_iters=30)
        assert converged
        assert len(calls) == 1

    def test_division_guard(self):
        def solve_fn(beta):
            return 1.0, 0.0, None
        with pytest.raises(BalanceDivisionError):
            balance_fixed_point(solve_fn, 1.0, 1.0, 0.5, eta0=0.0)

    def test_select_parameters_on_1d_problem(self, small_1d_problem):
        cmap = small_1d_problem
        phi = dr.sine_basis_1d(cmap.grid, 1)[0]
        cfg = dr.RegConfig(eta_l2=1e-4, balance_penalty="l2",
                           balance_alpha=1e-4, balance_rel_tol=1e-3,
                           balance_max_iters=30)
        final_cfg, sol = dr.select_parameters_balance(cmap, phi, cfg)
        assert final_cfg.eta_l2 > 0
        assert np.all(np.isfinite(sol.u.samples))


class TestObservability:
    def test_full_domain_positive(self, full_sensor_problem):
        basis = dr.sine_basis_1d(full_sensor_problem.grid, 1)
        gamma = dr.observability_min_eig(full_sensor_problem, basis)
        assert gamma > 1e-6

    def test_two_interval_sensor_severely_ill_posed(self, grid199):
        cmap = dr.ControlMap(
            dr.DiffusionModel1D(grid199, lambda x: 1.0625 - (x - 0.5) ** 4),
            dr.ObservationOp.from_intervals(grid199, [(0.23, 0.31), (0.46, 0.53)]),
            dr.TimeGrid(1.0, 200))
        basis = dr.sine_basis_1d(grid199, 8)
        gamma = dr.observability_min_eig(cmap, basis)
        assert 0 <= gamma < 1e-4  # small: severe ill-posedness diagnostic
