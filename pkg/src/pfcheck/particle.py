"""Discretized particle sector: periodic grid, spectral momenta, potentials.

The particle configuration space [0, L)^n is a periodic box sampled at P
points per axis.  Momentum operators are diagonal in the discrete Fourier
basis with the standard periodic wavenumbers, so they commute exactly and
differentiate band-limited grid functions without error.  The softened
Coulomb kernel 1 / sqrt(|.|^2 + delta^2) with minimum-image distances is
declared to be THE potential of this artifact; its relative bound against
the spectral Laplacian is estimated, not assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .iterative import PowerResult, power_norm

__all__ = [
    "SpatialGrid",
    "PotentialSpec",
    "KatoEstimate",
    "momentum_symbol",
    "laplacian_symbol",
    "coulomb_values",
    "kato_bound_estimate",
    "write_potential_binary",
]


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on [0, L)^n_coords with P points per axis."""

    n_coords: int
    points: int
    length: float

    def __post_init__(self):
        if self.n_coords < 1:
            raise ValueError("n_coords must be >= 1")
        if self.points < 2:
            raise ValueError("need at least 2 points per axis")
        if self.length <= 0:
            raise ValueError("box length must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.n_coords

    @property
    def size(self) -> int:
        return self.points**self.n_coords

    @property
    def spacing(self) -> float:
        return self.length / self.points

    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing

    def axis_wavenumbers(self) -> np.ndarray:
        """FFT-ordered wavenumbers 2 pi m / L, m = 0..P/2-1, -P/2..-1."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def axis_indices(self) -> np.ndarray:
        """FFT-ordered integer Fourier indices (Nyquist counted as +P/2)."""
        return np.rint(self.axis_wavenumbers() * self.length / (2.0 * np.pi)).astype(int)

    @property
    def max_band_index(self) -> int:
        """Largest symmetric Fourier index: P // 2 - 1 for even P."""
        return (self.points - 1) // 2 if self.points % 2 else self.points // 2 - 1

    def coordinates(self) -> np.ndarray:
        """(shape..., n_coords) array of grid-point coordinates."""
        axes = np.meshgrid(*([self.axis_coordinates()] * self.n_coords), indexing="ij")
        return np.stack(axes, axis=-1)


def momentum_symbol(grid: SpatialGrid, axis: int) -> np.ndarray:
    """Fourier symbol of p_axis = -i d/dx_axis, broadcast over the grid shape."""
    if not 0 <= axis < grid.n_coords:
        raise ValueError("axis out of range")
    kappa = grid.axis_wavenumbers()
    shape = [1] * grid.n_coords
    shape[axis] = grid.points
    return np.broadcast_to(kappa.reshape(shape), grid.shape).copy()


def laplacian_symbol(grid: SpatialGrid) -> np.ndarray:
    """Fourier symbol of p^2 = sum_j p_j^2."""
    total = np.zeros(grid.shape)
    for axis in range(grid.n_coords):
        total += momentum_symbol(grid, axis) ** 2
    return total


@dataclass(frozen=True)
class PotentialSpec:
    """Softened Coulomb data: pair coefficients, nuclei, softening delta > 0.

    pair_coefficients is an (n, n) array c[j, l] weighting 1/|x_j - x_l| for
    j != l (the diagonal is ignored); nuclear_charges is (n, M) weighting
    1/|x_j - R_J|.  Distances use the minimum-image convention on the torus
    and the softened kernel 1 / sqrt(r^2 + delta^2).
    """

    particle_count: int
    softening: float
    pair_coefficients: np.ndarray | None = None
    nuclear_positions: np.ndarray | None = None
    nuclear_charges: np.ndarray | None = None

    def __post_init__(self):
        if self.softening <= 0:
            raise ValueError("softening parameter must be > 0")
        n = self.particle_count
        if self.pair_coefficients is not None:
            c = np.asarray(self.pair_coefficients, dtype=float)
            if c.shape != (n, n):
                raise ValueError("pair_coefficients must be (n, n)")
            object.__setattr__(self, "pair_coefficients", c)
        if (self.nuclear_positions is None) != (self.nuclear_charges is None):
            raise ValueError("nuclear positions and charges come together")
        if self.nuclear_positions is not None:
            R = np.atleast_2d(np.asarray(self.nuclear_positions, dtype=float))
            z = np.asarray(self.nuclear_charges, dtype=float)
            if z.shape != (n, R.shape[0]):
                raise ValueError("nuclear_charges must be (n_particles, n_nuclei)")
            object.__setattr__(self, "nuclear_positions", R)
            object.__setattr__(self, "nuclear_charges", z)


def _min_image(diff: np.ndarray, length: float) -> np.ndarray:
    return diff - length * np.round(diff / length)


def coulomb_values(grid: SpatialGrid, spec: PotentialSpec,
                   particle_dim: int | None = None) -> np.ndarray:
    """Diagonal of V_c over the grid, shape grid.shape (real).

    The grid's n_coords axes are grouped into particle_dim-sized blocks, one
    per particle (defaults to n_coords // particle_count).
    """
    n = spec.particle_count
    if particle_dim is None:
        if grid.n_coords % n:
            raise ValueError("grid coordinates do not split evenly into particles")
        particle_dim = grid.n_coords // n
    if n * particle_dim != grid.n_coords:
        raise ValueError("particle_count * particle_dim must equal n_coords")
    if spec.nuclear_positions is not None and spec.nuclear_positions.shape[1] != particle_dim:
        raise ValueError("nuclear positions must have particle_dim components")

    coords = grid.coordinates()  # (shape..., n_coords)
    xs = [coords[..., j * particle_dim:(j + 1) * particle_dim] for j in range(n)]
    out = np.zeros(grid.shape)
    delta2 = spec.softening**2
    if spec.pair_coefficients is not None:
        for j in range(n):
            for l in range(n):
                if j == l or spec.pair_coefficients[j, l] == 0.0:
                    continue
                d = _min_image(xs[j] - xs[l], grid.length)
                out += spec.pair_coefficients[j, l] / np.sqrt(
                    np.sum(d**2, axis=-1) + delta2
                )
    if spec.nuclear_positions is not None:
        for j in range(n):
            for J, R in enumerate(spec.nuclear_positions):
                z = spec.nuclear_charges[j, J]
                if z == 0.0:
                    continue
                d = _min_image(xs[j] - R, grid.length)
                out += z / np.sqrt(np.sum(d**2, axis=-1) + delta2)
    return out


@dataclass
class KatoEstimate:
    b: float
    a_min: float
    iterations: int
    residual: float
    converged: bool


def _sigma_dense(v_flat: np.ndarray, lap_flat_f: np.ndarray, shape, a: float, b: float) -> float:
    """sigma_max(V (a p^2 + b)^{-1}) by dense SVD (independent oracle route)."""
    size = v_flat.size
    eye = np.eye(size, dtype=complex).reshape((size,) + shape)
    f = np.fft.fftn(eye, axes=range(1, len(shape) + 1), norm="ortho")
    f *= (1.0 / (a * lap_flat_f + b)).reshape((1,) + shape)
    w_inv = np.fft.ifftn(f, axes=range(1, len(shape) + 1), norm="ortho").reshape(size, size).T
    mat = v_flat[:, None] * w_inv
    return float(np.linalg.svd(mat, compute_uv=False)[0])


def _sigma_power(v_flat, lap_f, shape, a, b, tol, max_iter, rng):
    """Same quantity via matrix-free power iteration (FFT matvecs)."""
    inv = 1.0 / (a * lap_f + b)
    axes = tuple(range(len(shape)))

    def apply_op(x):
        y = np.fft.fftn(x.reshape(shape), axes=axes, norm="ortho")
        y *= inv
        y = np.fft.ifftn(y, axes=axes, norm="ortho")
        return (v_flat.reshape(shape) * y).ravel()

    def apply_adj(x):
        y = np.fft.fftn((v_flat.reshape(shape) * x.reshape(shape)), axes=axes, norm="ortho")
        y *= inv
        return np.fft.ifftn(y, axes=axes, norm="ortho").ravel()

    return power_norm(apply_op, apply_adj, v_flat.size, tol=tol, max_iter=max_iter, rng=rng)


def kato_bound_estimate(
    v_values: np.ndarray,
    grid: SpatialGrid,
    b_values,
    tol: float = 1e-10,
    dense: bool | None = None,
    max_iter: int = 20000,
    seed: int = 0,
    dense_threshold: int = 4096,
) -> list[KatoEstimate]:
    """Smallest a with ||V psi|| <= a ||p^2 psi|| + b ||psi|| for each b.

    Computed as the a at which the generalized singular value
    sigma(a) = max_psi ||V psi|| / ||(a p^2 + b) psi|| crosses 1 (zero when
    sigma(0) <= 1 already).  sigma is non-increasing in both a and b, so the
    bisection is well posed and a_min(b) is non-increasing in b.  When no
    finite a works (e.g. V constant with |V| > b, where the zero mode defeats
    the Laplacian) the estimate reports a_min = inf.
    """
    v_flat = np.asarray(v_values, dtype=float).ravel()
    if v_flat.size != grid.size:
        raise ValueError("potential values must cover the grid")
    bs = [float(b) for b in b_values]
    if any(b <= 0 for b in bs) or any(b2 <= b1 for b1, b2 in zip(bs, bs[1:])):
        raise ValueError("b_values must be positive and strictly increasing")
    lap_f = laplacian_symbol(grid)
    if dense is None:
        dense = grid.size <= dense_threshold

    results = []
    for b in bs:
        iters = 0
        residual = 0.0
        converged = True

        def sigma(a: float) -> float:
            nonlocal iters, residual, converged
            if dense:
                return _sigma_dense(v_flat, lap_f, grid.shape, a, b)
            rng = np.random.default_rng(seed)
            res = _sigma_power(v_flat, lap_f, grid.shape, a, b, tol, max_iter, rng)
            iters += res.iterations
            residual = max(residual, res.residual)
            converged = converged and res.converged
            return res.value

        if sigma(0.0) <= 1.0:
            results.append(KatoEstimate(b, 0.0, iters, residual, converged))
            continue
        hi = 1.0
        grow = 0
        while sigma(hi) > 1.0:
            hi *= 2.0
            grow += 1
            if grow > 60:
                results.append(KatoEstimate(b, np.inf, iters, residual, False))
                break
        else:
            lo = 0.0 if hi == 1.0 else hi / 2.0
            while hi - lo > 1e-10 * max(hi, 1.0):
                mid = 0.5 * (lo + hi)
                if sigma(mid) > 1.0:
                    lo = mid
                else:
                    hi = mid
            results.append(KatoEstimate(b, hi, iters, residual, converged))
    return results


def write_potential_binary(values: np.ndarray, path) -> None:
    """Flat little-endian binary export: row-major (re, im) double pairs."""
    flat = np.ascontiguousarray(values, dtype=complex).ravel()
    flat.astype("<c16").tofile(path)
