"""Orthonormal families spanning the reconstruction subspace X_m.

Three constructions: 1-D sine modes, 2-D tensor sine modes, and a 1-D
wavelet family built from the 10-tap Daubechies filter.  Every returned
basis is orthonormal under the discrete inner product of
:mod:`dualrecon.spaces` to 1e-10 or better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .spaces import Field, Grid1D, Grid2D, inner_x, norm_x


@dataclass(frozen=True)
class Basis:
    """Ordered orthonormal family of fields, indexed 1..m."""

    fields: tuple
    label: str

    def __len__(self) -> int:
        return len(self.fields)

    def __getitem__(self, k: int) -> Field:
        return self.fields[k]

    def gram(self) -> np.ndarray:
        m = len(self.fields)
        g = np.empty((m, m))
        for j in range(m):
            for k in range(j, m):
                g[j, k] = g[k, j] = inner_x(self.fields[j], self.fields[k])
        return g

    def coefficients_of(self, f: Field) -> np.ndarray:
        return np.array([inner_x(phi, f) for phi in self.fields])

    def assemble(self, coeffs) -> Field:
        grid = self.fields[0].grid
        values = np.zeros(grid.size)
        for c, phi in zip(coeffs, self.fields):
            values += c * phi.values
        return Field(grid, values)

    def save_csv(self, path) -> None:
        """Export 1-D basis vectors as rows x,phi1,...,phim."""
        grid = self.fields[0].grid
        if not isinstance(grid, Grid1D):
            raise ValueError("CSV export is defined for 1-D bases only")
        m = len(self.fields)
        with open(path, "w", newline="") as fh:
            fh.write("x," + ",".join(f"phi{k + 1}" for k in range(m)) + "\n")
            for i, x in enumerate(grid.nodes):
                row = [f"{x:.17g}"] + [f"{phi.values[i]:.17g}" for phi in self.fields]
                fh.write(",".join(row) + "\n")


def _orthonormalize(grid, vectors, label) -> Basis:
    """Modified Gram-Schmidt (two passes) under the discrete inner product."""
    fields = []
    for v in vectors:
        f = Field(grid, v)
        for _ in range(2):
            for q in fields:
                f = Field(grid, f.values - inner_x(q, f) * q.values)
        nrm = norm_x(f)
        if nrm < 1e-12:
            raise CapacityError(f"{label}: candidate vector is linearly dependent")
        fields.append(Field(grid, f.values / nrm))
    return Basis(tuple(fields), label)


def sine_basis_1d(grid: Grid1D, m: int) -> Basis:
    """Normalized sine modes sqrt(2) sin(k pi x), k = 1..m.

    The k = 0 mode of the continuous family is identically zero and is
    skipped; indexing starts at k = 1.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > grid.n_interior:
        raise CapacityError(f"m={m} exceeds grid capacity {grid.n_interior}")
    x = grid.nodes
    fields = []
    for k in range(1, m + 1):
        v = np.sqrt(2.0) * np.sin(k * np.pi * x)
        f = Field(grid, v)
        fields.append(Field(grid, v / norm_x(f)))
    return Basis(tuple(fields), "sine-1d")


def sine_basis_2d(grid: Grid2D, m_per_axis: int) -> Basis:
    """Tensor products sin(k pi x) sin(l pi y), (k,l) lexicographic."""
    if m_per_axis < 1:
        raise ValueError("m_per_axis must be >= 1")
    if m_per_axis > min(grid.nx, grid.ny):
        raise CapacityError(
            f"m_per_axis={m_per_axis} exceeds grid capacity {min(grid.nx, grid.ny)}"
        )
    sx = np.sin(np.pi * np.outer(np.arange(1, m_per_axis + 1), grid.xs))
    sy = np.sin(np.pi * np.outer(np.arange(1, m_per_axis + 1), grid.ys))
    fields = []
    for k in range(m_per_axis):
        for l in range(m_per_axis):
            v = 2.0 * np.outer(sx[k], sy[l]).ravel()
            f = Field(grid, v)
            fields.append(Field(grid, v / norm_x(f)))
    return Basis(tuple(fields), "sine-2d")


# ---------------------------------------------------------------------------
# Daubechies wavelets


def daubechies_filter(taps: int = 10) -> np.ndarray:
    """Extremal-phase Daubechies low-pass filter with the given tap count.

    Computed by spectral factorization of the Daubechies half-band
    polynomial, so the quadrature-mirror identities (sum h = sqrt(2),
    shift-by-2 orthogonality) hold to machine precision by construction.
    """
    if taps % 2 != 0 or taps < 2:
        raise ValueError("tap count must be a positive even number")
    p = taps // 2
    binom = [math.comb(p - 1 + k, k) for k in range(p)]
    yroots = np.roots(binom[::-1]) if p > 1 else np.array([])
    poly = np.array([1.0 + 0j])
    for y in yroots:
        b = complex(1.0 - 2.0 * y)
        z = b + np.sqrt(b * b - 1.0)
        if abs(z) > 1.0:
            z = b - np.sqrt(b * b - 1.0)
        poly = np.convolve(poly, np.array([-z, 1.0]) / (1.0 - z))
    for _ in range(p):
        poly = np.convolve(poly, [0.5, 0.5])
    return np.sqrt(2.0) * np.real(poly)


def quadrature_mirror_residuals(h: np.ndarray) -> tuple[float, float]:
    """(|sum h - sqrt(2)|, max_k |sum_i h_i h_{i+2k} - delta_k0|)."""
    s = abs(float(np.sum(h)) - np.sqrt(2.0))
    worst = 0.0
    for k in range(len(h) // 2):
        v = float(np.dot(h[: len(h) - 2 * k], h[2 * k :]))
        target = 1.0 if k == 0 else 0.0
        worst = max(worst, abs(v - target))
    return s, worst


def _idwt_periodic_level(a, d, h, g) -> np.ndarray:
    n = 2 * len(a)
    x = np.zeros(n)
    for k in range(len(a)):
        for i in range(len(h)):
            x[(2 * k + i) % n] += a[k] * h[i] + d[k] * g[i]
    return x


def _synthesize(coeffs: np.ndarray, n_levels: int, h: np.ndarray) -> np.ndarray:
    """Inverse periodized DWT of a coefficient vector laid out coarsest-first:
    [a_J | d_J | d_{J-1} | ... | d_1]."""
    g = np.array([(-1) ** k * h[len(h) - 1 - k] for k in range(len(h))])
    n = len(coeffs)
    coarse = n >> n_levels
    a = coeffs[:coarse].copy()
    pos = coarse
    for lev in range(n_levels, 0, -1):
        d = coeffs[pos : pos + len(a)]
        a = _idwt_periodic_level(a, d, h, g)
        pos += len(d)
    return a


def daubechies_basis_1d(grid: Grid1D, m: int, taps: int = 10) -> Basis:
    """Wavelet basis from the 10-tap Daubechies filter, coarsest slots first.

    Unit coefficient vectors are synthesized by the inverse periodized DWT
    on the next power-of-two length, sampled onto the interior nodes, and
    re-orthonormalized under the grid inner product (which also absorbs the
    periodic-to-interval boundary mismatch).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > grid.n_interior:
        raise CapacityError(f"m={m} exceeds grid capacity {grid.n_interior}")
    h = daubechies_filter(taps)
    s_res, o_res = quadrature_mirror_residuals(h)
    if s_res > 1e-12 or o_res > 1e-12:
        raise AssertionError("Daubechies filter failed its quadrature-mirror self-test")

    n_sig = 1 << max(3, math.ceil(math.log2(grid.n_interior + 1)))
    # keep the coarsest approximation at 8 slots (or coarser for tiny grids)
    n_levels = max(1, int(math.log2(n_sig)) - 3)
    if m > n_sig:
        raise CapacityError(f"m={m} exceeds available wavelet slots {n_sig}")

    t_sig = (np.arange(n_sig) + 0.5) / n_sig
    vectors = []
    for s in range(m):
        c = np.zeros(n_sig)
        c[s] = 1.0
        sig = _synthesize(c, n_levels, h)
        vectors.append(np.interp(grid.nodes, t_sig, sig))
    return _orthonormalize(grid, vectors, "daubechies")
