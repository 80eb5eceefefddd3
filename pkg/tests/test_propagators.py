import numpy as np
import pytest

import dualrecon as dr
from dualrecon.propagators import advection_matrix


def heat_mode(grid, k=1):
    return dr.Field(grid, np.sin(k * np.pi * grid.nodes))


def drift_diffusion_dirichlet_reference(g, u0_fn, d, c, t, n_fine=511):
    """Exact solution of u_t + c.grad(u) = d Lap(u), Dirichlet on the square.

    The substitution u = exp(c.x/(2d) - |c|^2 t/(4d)) w reduces the PDE to
    the heat equation for w with the same boundary condition, solved by its
    sine series.  Coefficients are computed on an independent fine grid.
    """
    import scipy.fft

    gf = dr.Grid2D(n_fine, n_fine)
    Xf, Yf = gf.meshgrid()
    w0 = u0_fn(Xf, Yf) * np.exp(-(c[0] * Xf + c[1] * Yf) / (2 * d))
    coeffs = scipy.fft.dstn(w0, type=1, norm="ortho")
    k = np.arange(1, n_fine + 1)
    coeffs *= np.exp(-d * np.pi**2 * (k[:, None] ** 2 + k[None, :] ** 2) * t)
    wt_fine = scipy.fft.idstn(coeffs, type=1, norm="ortho")
    step = (n_fine + 1) // (g.nx + 1)
    wt = wt_fine[step - 1::step, step - 1::step][: g.nx, : g.ny]
    X, Y = g.meshgrid()
    u = wt * np.exp((c[0] * X + c[1] * Y) / (2 * d)
                    - (c[0] ** 2 + c[1] ** 2) * t / (4 * d))
    return u.ravel()


class TestCnStep:
    def test_zero_maps_to_zero(self, grid199):
        p = dr.Propagator(dr.DiffusionModel1D(grid199, 1.0), dr.TimeGrid(1.0, 100))
        out = dr.cn_step(p, dr.Field.zeros(grid199))
        assert np.all(out.values == 0.0)

    def test_discrete_eigenvector_exact(self, grid199):
        model = dr.DiffusionModel1D(grid199, 1.0)
        dt = 0.01
        p = dr.Propagator(model, dr.TimeGrid(dt * 10, 10))
        h = grid199.h
        lam = -(4.0 / h**2) * np.sin(0.5 * np.pi * h) ** 2
        phi = heat_mode(grid199)
        expected = (2 + dt * lam) / (2 - dt * lam) * phi.values
        out = dr.cn_step(p, phi)
        assert np.max(np.abs(out.values - expected)) < 1e-12

    def test_analytic_decay(self, grid199):
        # integrate sin(pi x) to t = 0.1 with n_t = 1000
        model = dr.DiffusionModel1D(grid199, 1.0)
        p = dr.Propagator(model, dr.TimeGrid(0.1, 1000))
        v = heat_mode(grid199)
        traj = dr.forward_trajectory(p, v)
        expected = np.exp(-np.pi**2 * 0.1) * v.values
        rel = np.linalg.norm(traj[-1].values - expected) / np.linalg.norm(expected)
        assert rel < 1e-3

    def test_second_order_in_time(self, grid199):
        model = dr.DiffusionModel1D(grid199, 1.0)
        v = heat_mode(grid199)
        h = grid199.h
        lam = -(4.0 / h**2) * np.sin(0.5 * np.pi * h) ** 2
        errs = []
        for n_t in (10, 20):
            p = dr.Propagator(model, dr.TimeGrid(0.1, n_t))
            out = dr.forward_trajectory(p, v)[-1]
            # compare against the exact discrete-in-space solution to
            # isolate the temporal error
            expected = np.exp(lam * 0.1) * v.values
            errs.append(np.linalg.norm(out.values - expected))
        ratio = errs[0] / errs[1]
        assert 3.4 < ratio < 4.6

    def test_contraction(self, grid199, rng):
        p = dr.Propagator(dr.DiffusionModel1D(grid199, 1.0), dr.TimeGrid(1.0, 50))
        for _ in range(5):
            v = dr.Field(grid199, rng.standard_normal(grid199.size))
            assert dr.norm_x(p.step(v)) <= dr.norm_x(v) + 1e-13

    def test_self_adjointness_1d(self, grid199, rng):
        d = lambda x: 1.0625 - (x - 0.5) ** 4
        p = dr.Propagator(dr.DiffusionModel1D(grid199, d), dr.TimeGrid(1.0, 50))
        v = dr.Field(grid199, rng.standard_normal(grid199.size))
        w = dr.Field(grid199, rng.standard_normal(grid199.size))
        lhs = dr.inner_x(p.step(v), w)
        rhs = dr.inner_x(v, p.step(w))
        assert abs(lhs - rhs) <= 1e-12 * dr.norm_x(v) * dr.norm_x(w)


class TestDiffusion2D:
    def test_dst_step_matches_sparse_solve(self, rng):
        # the spectral step must agree with a direct Crank-Nicolson solve
        import scipy.sparse as sp
        from scipy.sparse.linalg import spsolve

        g = dr.Grid2D(15, 17)
        model = dr.DiffusionModel2D(g, 0.3)
        tg = dr.TimeGrid(1.0, 100)
        p = dr.Propagator(model, tg)
        v = rng.standard_normal(g.size)
        a = model.generator
        eye = sp.eye_array(g.size, format="csc")
        direct = spsolve((eye - 0.5 * tg.dt * a).tocsc(),
                         (eye + 0.5 * tg.dt * a) @ v)
        np.testing.assert_allclose(p.step_values(v), direct, atol=1e-12)

    def test_2d_eigenmode_decay(self):
        g = dr.Grid2D(31, 31)
        model = dr.DiffusionModel2D(g, 1.0)
        p = dr.Propagator(model, dr.TimeGrid(0.02, 200))
        X, Y = g.meshgrid()
        v = dr.Field(g, (np.sin(np.pi * X) * np.sin(np.pi * Y)).ravel())
        out = dr.forward_trajectory(p, v)[-1]
        expected = np.exp(-2 * np.pi**2 * 0.02) * v.values
        rel = np.linalg.norm(out.values - expected) / np.linalg.norm(expected)
        assert rel < 2e-3


class TestAdvection:
    def test_zero_velocity_identity(self, rng):
        g = dr.Grid2D(15, 15)
        m = dr.ConvDiffModel2D(g, 0.1, (0.0, 0.0))
        v = dr.Field(g, rng.standard_normal(g.size))
        out = dr.advect_step(m, v, 0.05)
        np.testing.assert_allclose(out.values, v.values, atol=1e-14)

    def test_grid_aligned_shift_exact(self):
        g = dr.Grid2D(15, 15)
        m = dr.ConvDiffModel2D(g, 0.1, (0.5, 0.0))
        dt = 2 * g.hx / 0.5  # c*dt = exactly two cells
        rng = np.random.default_rng(3)
        vals = rng.standard_normal((15, 15))
        v = dr.Field(g, vals.ravel())
        out = dr.advect_step(m, v, dt).values.reshape(15, 15)
        # interior columns shift by two; inflow columns read zero
        np.testing.assert_allclose(out[2:, :], vals[:-2, :], atol=1e-12)
        np.testing.assert_allclose(out[:2, :], 0.0, atol=1e-12)

    def test_cubic_exactness(self):
        # cubic interpolation reproduces cubics away from the boundary
        g = dr.Grid2D(31, 31)
        c = (0.5, 0.0)
        m = dr.ConvDiffModel2D(g, 0.1, c)
        dt = 0.013  # sub-grid displacement
        X, _ = g.meshgrid()
        v = dr.Field(g, (X**3).ravel())
        out = dr.advect_step(m, v, dt).values.reshape(31, 31)
        expected = (X - c[0] * dt) ** 3
        interior = np.abs(out[4:-4, 4:-4] - expected[4:-4, 4:-4])
        assert np.max(interior) < 1e-10

    def test_adjoint_is_matrix_transpose(self, rng):
        g = dr.Grid2D(15, 15)
        m = dr.ConvDiffModel2D(g, 0.1, (0.4, -0.3))
        v = dr.Field(g, rng.standard_normal(g.size))
        w = dr.Field(g, rng.standard_normal(g.size))
        lhs = dr.inner_x(dr.advect_step(m, v, 0.05, "forward"), w)
        rhs = dr.inner_x(v, dr.advect_step(m, w, 0.05, "adjoint"), )
        assert abs(lhs - rhs) <= 1e-12 * dr.norm_x(v) * dr.norm_x(w)

    def test_adjoint_close_to_reverse_advection(self, rng):
        # away from the boundary the transpose agrees with advection by -c
        g = dr.Grid2D(63, 63)
        m = dr.ConvDiffModel2D(g, 0.1, (0.5, 0.5))
        X, Y = g.meshgrid()
        bump = np.exp(-200 * ((X - 0.5) ** 2 + (Y - 0.5) ** 2))
        v = dr.Field(g, bump.ravel())
        back = dr.advect_step(m, v, 0.01, "adjoint")
        m_rev = dr.ConvDiffModel2D(g, 0.1, (-0.5, -0.5))
        ref = dr.advect_step(m_rev, v, 0.01, "forward")
        rel = np.linalg.norm(back.values - ref.values) / np.linalg.norm(ref.values)
        assert rel < 1e-10


class TestStrang:
    def test_zero_velocity_equals_cn(self, rng):
        g = dr.Grid2D(15, 15)
        tg = dr.TimeGrid(1.0, 50)
        m = dr.ConvDiffModel2D(g, 0.1, (0.0, 0.0))
        p = dr.Propagator(m, tg)
        v = dr.Field(g, rng.standard_normal(g.size))
        np.testing.assert_allclose(
            p.step(v).values, dr.cn_step(p, v).values, atol=1e-12)

    def test_vanishing_diffusion_collapses_to_advection(self):
        # with d -> 0 the diffusion sub-step is the identity, so the split
        # step equals the composition of the two half advection steps
        g = dr.Grid2D(63, 63)
        tg = dr.TimeGrid(1.0, 100)
        m = dr.ConvDiffModel2D(g, 1e-14, (0.5, 0.5))
        X, Y = g.meshgrid()
        bump = np.exp(-200 * ((X - 0.4) ** 2 + (Y - 0.4) ** 2))
        v = dr.Field(g, bump.ravel())
        split = dr.strang_step(m, v, tg)
        half = dr.advect_step(m, v, 0.5 * tg.dt)
        pure = dr.advect_step(m, half, 0.5 * tg.dt)
        rel = np.linalg.norm(split.values - pure.values) / np.linalg.norm(pure.values)
        assert rel < 1e-9

    def test_drift_diffusion_gaussian(self):
        # analytic reference: u = exp(c.x/(2d) - |c|^2 t/(4d)) w with
        # w solving the pure heat equation (Dirichlet), given by its sine
        # series; this is exact on the square, including boundary effects
        g = dr.Grid2D(127, 127)
        d, c, t = 0.1, np.array([0.5, 0.5]), 0.25
        m = dr.ConvDiffModel2D(g, d, c)
        p = dr.Propagator(m, dr.TimeGrid(t, 50))
        s0 = 0.004
        u0 = lambda X, Y: np.exp(
            -((X - 0.3) ** 2 + (Y - 0.3) ** 2) / (2 * s0))
        X, Y = g.meshgrid()
        traj = dr.forward_trajectory(p, dr.Field(g, u0(X, Y).ravel()))
        exact = drift_diffusion_dirichlet_reference(g, u0, d, c, t)
        rel = np.linalg.norm(traj[-1].values - exact) / np.linalg.norm(exact)
        assert rel < 2e-2
        # the free-space advected kernel (center + c t, variance + 2 d t)
        # agrees only up to the Dirichlet boundary truncation of its tails
        s_t = s0 + 2 * d * t
        center = np.array([0.3, 0.3]) + c * t
        free = (s0 / s_t) * np.exp(
            -((X - center[0]) ** 2 + (Y - center[1]) ** 2) / (2 * s_t))
        rel_free = np.linalg.norm(traj[-1].values - free.ravel()) / np.linalg.norm(free)
        assert rel_free < 0.2


class TestTrajectory:
    def test_zero_everything(self, grid49):
        p = dr.Propagator(dr.DiffusionModel1D(grid49, 1.0), dr.TimeGrid(1.0, 10))
        traj = dr.forward_trajectory(p, dr.Field.zeros(grid49))
        assert len(traj) == 11
        assert all(np.all(f.values == 0) for f in traj)

    def test_example1_model_decays_monotonically(self, grid199):
        d = lambda x: 1.0625 - (x - 0.5) ** 4
        model = dr.DiffusionModel1D(grid199, d)
        p = dr.Propagator(model, dr.TimeGrid(1.0, 200))
        x0 = dr.Field(grid199, np.exp(-200 * (grid199.nodes - 0.5) ** 4))
        traj = dr.forward_trajectory(p, x0)
        norms = [dr.norm_x(f) for f in traj]
        assert all(np.isfinite(norms))
        assert all(b <= a + 1e-14 for a, b in zip(norms, norms[1:]))

    def test_constant_source_steady_state(self, grid49):
        # long-time limit solves -A x = f
        model = dr.DiffusionModel1D(grid49, 1.0)
        p = dr.Propagator(model, dr.TimeGrid(5.0, 500))
        f = dr.Field(grid49, np.ones(grid49.size))
        traj = dr.forward_trajectory(p, dr.Field.zeros(grid49), f)
        x = grid49.nodes
        steady = x * (1 - x) / 2  # solves -u'' = 1, u(0)=u(1)=0
        rel = np.linalg.norm(traj[-1].values - steady) / np.linalg.norm(steady)
        assert rel < 1e-3

    def test_cfl_warning(self):
        g = dr.Grid2D(15, 15)
        m = dr.ConvDiffModel2D(g, 0.1, (3.0, 0.0))
        with pytest.warns(UserWarning, match="foot points"):
            dr.Propagator(m, dr.TimeGrid(1.0, 2))


def test_advection_matrix_rows_sum_to_one_inside():
    # interpolation weights are a partition of unity away from the boundary
    g = dr.Grid2D(31, 31)
    t = advection_matrix(g, (0.013, 0.007))
    sums = np.asarray(t.sum(axis=1)).ravel().reshape(31, 31)
    np.testing.assert_allclose(sums[4:-4, 4:-4], 1.0, atol=1e-12)
