"""Discrete semigroup actions for the three PDE models.

Time stepping is Crank-Nicolson (the (1,1) Pade approximation
r(z) = (2+z)/(2-z) of the exponential) for the diffusive part, and for
convection-diffusion a two-stage Strang splitting whose hyperbolic
sub-step follows characteristics with cubic interpolation.

The adjoint direction is the exact algebraic transpose of the forward
step under the discrete inner product: for the diffusion models the step
matrix is symmetric so forward and adjoint coincide; for
convection-diffusion the interpolation matrix of the advection sub-step
is transposed (which agrees with advection by -c away from the
boundary).
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
import scipy.fft
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from .spaces import Field, Grid1D, Grid2D, TimeGrid
from .errors import DimensionError


# ---------------------------------------------------------------------------
# Models (discrete generators)


class DiffusionModel1D:
    """d/dx (d(x) d/dx) on [0,1] with Dirichlet boundary.

    Conservative second-order stencil with the conductivity evaluated at
    half nodes, which keeps the generator exactly symmetric.
    """

    def __init__(self, grid: Grid1D, d: float | Callable[[np.ndarray], np.ndarray]):
        self.grid = grid
        n, h = grid.n_interior, grid.h
        half = (np.arange(n + 1) + 0.5) * h  # x_{i+1/2}, i = 0..n
        d_half = np.full(n + 1, float(d)) if np.isscalar(d) else np.asarray(d(half), dtype=float)
        if np.any(d_half <= 0):
            raise ValueError("conductivity must be positive")
        self.d_half = d_half
        lower = d_half[1:n] / h**2
        diag = -(d_half[:n] + d_half[1:]) / h**2
        self.generator = sp.diags_array(
            [lower, diag, lower], offsets=[-1, 0, 1], shape=(n, n)
        ).tocsc()

    @property
    def is_self_adjoint(self) -> bool:
        return True


def _laplacian_1d(n: int, h: float) -> sp.csc_array:
    e = np.ones(n)
    return sp.diags_array(
        [e[:-1], -2.0 * e, e[:-1]], offsets=[-1, 0, 1], shape=(n, n)
    ).tocsc() / h**2


class DiffusionModel2D:
    """Constant-coefficient diffusion d * Laplacian on the unit square."""

    def __init__(self, grid: Grid2D, d: float):
        if d <= 0:
            raise ValueError("diffusivity must be positive")
        self.grid = grid
        self.d = float(d)
        ax = _laplacian_1d(grid.nx, grid.hx)
        ay = _laplacian_1d(grid.ny, grid.hy)
        ix = sp.eye_array(grid.nx, format="csc")
        iy = sp.eye_array(grid.ny, format="csc")
        self.generator = (d * (sp.kron(ax, iy) + sp.kron(ix, ay))).tocsc()
        # discrete sine eigenvalues: the 5-point Laplacian is diagonal in
        # the DST-I basis, enabling a fast spectral Crank-Nicolson step
        kx = np.arange(1, grid.nx + 1)
        ky = np.arange(1, grid.ny + 1)
        lx = -(4.0 / grid.hx**2) * np.sin(0.5 * np.pi * kx * grid.hx) ** 2
        ly = -(4.0 / grid.hy**2) * np.sin(0.5 * np.pi * ky * grid.hy) ** 2
        self.sine_eigenvalues = d * (lx[:, None] + ly[None, :])

    @property
    def is_self_adjoint(self) -> bool:
        return True


class ConvDiffModel2D:
    """Convection-diffusion with constant velocity c and diffusivity d."""

    def __init__(self, grid: Grid2D, d: float, c):
        self.grid = grid
        self.diffusion = DiffusionModel2D(grid, d)
        self.d = float(d)
        self.c = np.asarray(c, dtype=float)
        if self.c.shape != (2,):
            raise ValueError("c must be a 2-vector")

    @property
    def generator(self):
        return self.diffusion.generator

    @property
    def is_self_adjoint(self) -> bool:
        return bool(np.all(self.c == 0.0))


# ---------------------------------------------------------------------------
# Advection by characteristics (cubic interpolation)


def _cubic_interp_matrix_1d(nodes: np.ndarray, h: float, shift: float) -> sp.csr_array:
    """Sparse matrix sampling a Dirichlet-extended grid function at
    nodes - shift, using 4-point cubic Lagrange interpolation.

    Stencil values at the boundary nodes (index 0 and n+1) and outside the
    domain read as zero.
    """
    n = len(nodes)
    rows, cols, vals = [], [], []
    for i in range(n):
        xf = nodes[i] - shift  # foot of the characteristic
        # base index into the extended grid x_j = j*h, j = 0..n+1
        jf = xf / h
        j0 = int(np.floor(jf)) - 1  # leftmost of the 4-point stencil
        s = jf - (j0 + 1)  # in [0,1): offset from the second stencil node
        # Lagrange weights on nodes {-1, 0, 1, 2} evaluated at s
        w = np.array(
            [
                -s * (s - 1.0) * (s - 2.0) / 6.0,
                (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
                -(s + 1.0) * s * (s - 2.0) / 2.0,
                (s + 1.0) * s * (s - 1.0) / 6.0,
            ]
        )
        for k in range(4):
            j = j0 + k  # extended-grid index
            if 1 <= j <= n and w[k] != 0.0:
                rows.append(i)
                cols.append(j - 1)
                vals.append(w[k])
    return sp.csr_array((vals, (rows, cols)), shape=(n, n))


def advection_matrix(grid: Grid2D, displacement) -> sp.csr_array:
    """Bicubic semi-Lagrangian step matrix: samples v at x - displacement."""
    tx = _cubic_interp_matrix_1d(grid.xs, grid.hx, displacement[0])
    ty = _cubic_interp_matrix_1d(grid.ys, grid.hy, displacement[1])
    return sp.kron(tx, ty).tocsr()


def advect_step(model: ConvDiffModel2D, v: Field, dt: float, direction: str = "forward") -> Field:
    """One pure-advection step over dt (adjoint = transpose of forward)."""
    if v.grid != model.grid:
        raise DimensionError("field grid does not match model grid")
    t = advection_matrix(model.grid, model.c * dt)
    mat = t if direction == "forward" else t.T.tocsr()
    return Field(model.grid, mat @ v.values)


# ---------------------------------------------------------------------------
# Propagator


class Propagator:
    """One-step discrete semigroup for a model on a fixed time grid.

    Immutable after construction; the Crank-Nicolson system matrix is
    factorized once and shared by every step.
    """

    def __init__(self, model, time_grid: TimeGrid, direction: str = "forward"):
        if direction not in ("forward", "adjoint"):
            raise ValueError("direction must be 'forward' or 'adjoint'")
        self.model = model
        self.time_grid = time_grid
        self.direction = direction
        dt = time_grid.dt
        diffusive = model.diffusion if isinstance(model, ConvDiffModel2D) else model
        eigs = getattr(diffusive, "sine_eigenvalues", None)
        if eigs is not None:
            z = dt * eigs
            self._cn_multiplier = (2.0 + z) / (2.0 - z)
            self._solve = None
            self._m_plus = None
        else:
            a = model.generator
            n = a.shape[0]
            eye = sp.eye_array(n, format="csc")
            self._cn_multiplier = None
            self._solve = factorized((eye - 0.5 * dt * a).tocsc())
            self._m_plus = (eye + 0.5 * dt * a).tocsr()
        if isinstance(model, ConvDiffModel2D):
            cfl = float(np.linalg.norm(model.c)) * dt
            if cfl >= 1.0:
                warnings.warn(
                    f"|c|*dt = {cfl:.3g} >= 1; advection foot points cross many cells",
                    stacklevel=2,
                )
            t_half = advection_matrix(model.grid, model.c * (0.5 * dt))
            self._adv = t_half if direction == "forward" else t_half.T.tocsr()
        else:
            self._adv = None

    @property
    def grid(self):
        return self.model.grid

    def _cn(self, values: np.ndarray) -> np.ndarray:
        if self._cn_multiplier is not None:
            g = self.model.grid
            coeffs = scipy.fft.dstn(values.reshape(g.nx, g.ny), type=1, norm="ortho")
            coeffs *= self._cn_multiplier
            return scipy.fft.idstn(coeffs, type=1, norm="ortho").ravel()
        return self._solve(self._m_plus @ values)

    def step_values(self, values: np.ndarray) -> np.ndarray:
        if self._adv is None:
            return self._cn(values)
        return self._adv @ self._cn(self._adv @ values)

    def step(self, v: Field) -> Field:
        """Advance one dt: Crank-Nicolson, or Strang splitting for
        convection-diffusion (half advection, diffusion, half advection)."""
        if v.grid != self.grid:
            raise DimensionError("field grid does not match propagator grid")
        return Field(self.grid, self.step_values(v.values))

    def half_source_values(self, values: np.ndarray) -> np.ndarray:
        """(I + S)/2 applied to a vector.

        For plain Crank-Nicolson this equals (I - dt/2 A)^{-1}, the factor
        the scheme attaches to the midpoint source term.
        """
        return 0.5 * (values + self.step_values(values))


def cn_step(p: Propagator, v: Field) -> Field:
    """Crank-Nicolson step (I - dt/2 A)^{-1} (I + dt/2 A) v, no splitting."""
    if v.grid != p.grid:
        raise DimensionError("field grid does not match propagator grid")
    return Field(p.grid, p._cn(v.values))


def strang_step(model: ConvDiffModel2D, v: Field, time_grid: TimeGrid,
                direction: str = "forward") -> Field:
    """One Strang-split step for convection-diffusion."""
    return Propagator(model, time_grid, direction).step(v)


def forward_trajectory(p: Propagator, x0: Field, f: Field | None = None) -> list[Field]:
    """States x(t_k), k = 0..n_t, with a time-independent source f.

    The source enters through the scheme's midpoint rule:
    x^{k+1} = S x^k + dt * (I + S)/2 f, which is the exact Crank-Nicolson
    update for constant f and exact for f = 0.
    """
    if x0.grid != p.grid:
        raise DimensionError("field grid does not match propagator grid")
    src = None
    if f is not None and np.any(f.values != 0.0):
        if f.grid != p.grid:
            raise DimensionError("source grid does not match propagator grid")
        src = p.time_grid.dt * p.half_source_values(f.values)
    out = [x0]
    v = x0.values
    for _ in range(p.time_grid.n_t):
        v = p.step_values(v)
        if src is not None:
            v = v + src
        out.append(Field(p.grid, v))
    return out
