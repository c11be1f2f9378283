"""Discretized one-particle momentum space and coupling functions.

The continuum one-particle space L^2(R^d; C^p) is replaced by a finite set of
weighted momentum modes.  Every inner product carries the quadrature weights,
so norms are exact finite sums.  Slots are (mode, polarization) pairs flattened
mode-major: slot s = mode_index * p + polarization.

Inner products are conjugate-linear in the FIRST argument throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModeGrid",
    "CouplingFamily",
    "dispersion",
    "inner",
    "norm",
    "omega_norm",
    "build_polarizations",
    "evaluate_coupling",
    "magnetic_coupling",
    "reciprocal_mode_grid",
    "line_couplings",
    "qed_couplings",
]


@dataclass(frozen=True)
class ModeGrid:
    """Finite set of momentum modes with dispersion and polarization labels.

    momenta: (M, d) array of pairwise distinct wave vectors.
    quadrature_weights: (M,) strictly positive weights (momentum-space volume).
    polarization_count: p >= 1 polarization labels per mode.
    photon_mass: m_ph >= 0; dispersion is sqrt(m_ph^2 + |k|^2), required > 0
    for every retained mode (a zero-frequency mode is a construction error).
    """

    momenta: np.ndarray
    quadrature_weights: np.ndarray
    polarization_count: int = 1
    photon_mass: float = 0.0

    def __post_init__(self):
        momenta = np.atleast_2d(np.asarray(self.momenta, dtype=float))
        weights = np.asarray(self.quadrature_weights, dtype=float).ravel()
        object.__setattr__(self, "momenta", momenta)
        object.__setattr__(self, "quadrature_weights", weights)
        if momenta.ndim != 2:
            raise ValueError("momenta must be an (M, d) array")
        if weights.shape != (momenta.shape[0],):
            raise ValueError("need one quadrature weight per mode")
        if not np.all(weights > 0):
            raise ValueError("quadrature weights must be strictly positive")
        if self.polarization_count < 1:
            raise ValueError("polarization_count must be >= 1")
        if self.photon_mass < 0:
            raise ValueError("photon_mass must be >= 0")
        omega = np.sqrt(self.photon_mass**2 + np.sum(momenta**2, axis=1))
        if not np.all(omega > 0):
            raise ValueError(
                "zero-frequency mode retained; exclude k = 0 when photon_mass = 0"
            )
        object.__setattr__(self, "omega", omega)
        seen = {tuple(row) for row in momenta}
        if len(seen) != momenta.shape[0]:
            raise ValueError("momenta must be pairwise distinct")

    # filled in __post_init__
    omega: np.ndarray = field(init=False, repr=False)

    @property
    def n_modes(self) -> int:
        return self.momenta.shape[0]

    @property
    def momentum_dim(self) -> int:
        return self.momenta.shape[1]

    @property
    def n_slots(self) -> int:
        return self.n_modes * self.polarization_count

    @property
    def slot_omega(self) -> np.ndarray:
        """Dispersion per slot, (S,)."""
        return np.repeat(self.omega, self.polarization_count)

    @property
    def slot_weight(self) -> np.ndarray:
        """Quadrature weight per slot, (S,)."""
        return np.repeat(self.quadrature_weights, self.polarization_count)

    @property
    def slot_momenta(self) -> np.ndarray:
        """Wave vector per slot, (S, d)."""
        return np.repeat(self.momenta, self.polarization_count, axis=0)


def dispersion(grid: ModeGrid, mode_index: int) -> float:
    """omega(k_i) = sqrt(m_ph^2 + |k_i|^2) for one retained mode."""
    return float(grid.omega[mode_index])


def inner(grid: ModeGrid, g: np.ndarray, h: np.ndarray) -> complex:
    """Weighted inner product (g, h), conjugate-linear in g."""
    return complex(np.sum(grid.slot_weight * np.conj(g) * h))


def norm(grid: ModeGrid, h: np.ndarray) -> float:
    return float(np.sqrt(np.sum(grid.slot_weight * np.abs(h) ** 2)))


def omega_norm(grid: ModeGrid, h: np.ndarray) -> float:
    """(||h||^2 + ||h/sqrt(omega)||^2)^{1/2}; always >= the plain norm."""
    h = np.asarray(h)
    if h.shape != (grid.n_slots,):
        raise ValueError(f"amplitude vector must have length {grid.n_slots}")
    w = grid.slot_weight
    return float(np.sqrt(np.sum(w * np.abs(h) ** 2 * (1.0 + 1.0 / grid.slot_omega))))


_DEFAULT_AXIS = np.array([1.0, 0.0, 0.0])
_FALLBACK_AXIS = np.array([0.0, 1.0, 0.0])


def build_polarizations(k, auxiliary_axis=_DEFAULT_AXIS, fallback_axis=_FALLBACK_AXIS):
    """Deterministic transverse orthonormal pair (eps1, eps2) for a 3-vector k.

    eps1 is the Gram-Schmidt projection of the auxiliary axis against k-hat;
    when k is (nearly) parallel to the auxiliary axis the fallback axis is used
    instead.  eps2 = k-hat x eps1, so (eps1, eps2, k-hat) is right-handed.
    """
    k = np.asarray(k, dtype=float)
    if k.shape != (3,):
        raise ValueError("polarization frames are defined for 3-vectors only")
    kn = np.linalg.norm(k)
    if kn == 0.0:
        raise ValueError("zero wave vector has no transverse frame")
    khat = k / kn
    axis = np.asarray(auxiliary_axis, dtype=float)
    residual = axis - np.dot(axis, khat) * khat
    if np.linalg.norm(residual) < 1e-8:
        residual = np.asarray(fallback_axis, dtype=float)
        residual = residual - np.dot(residual, khat) * khat
    eps1 = residual / np.linalg.norm(residual)
    eps2 = np.cross(khat, eps1)
    return eps1, eps2


@dataclass(frozen=True)
class CouplingFamily:
    """Coupling function x -> G(x) in the one-particle space.

    The evaluated vector is  G(x)[s] = profile[s] * exp(-i sum_c wave[c, s] x_c)
    over the composite-space coordinates c, so the analytic derivative with
    respect to coordinate c is -i wave[c, s] G(x)[s].  `coordinate` names the
    composite coordinate this family couples to in sum_j (p_j + A_j)^2.

    For the radiation-field couplings: profile = rho(k) omega(k)^{-1/2}
    eps_a(lambda, k) (or the cross-product weight for the magnetic family) and
    wave[c, s] holds the components of k on the owning particle's coordinates.
    """

    grid: ModeGrid
    profile: np.ndarray        # (S,) complex, value at x = 0
    wavenumbers: np.ndarray    # (n_coords, S) real phase gradients
    coordinate: int
    particle_index: int = 0
    component: int = 0
    label: str = "G"

    def __post_init__(self):
        profile = np.asarray(self.profile, dtype=complex).ravel()
        wave = np.atleast_2d(np.asarray(self.wavenumbers, dtype=float))
        object.__setattr__(self, "profile", profile)
        object.__setattr__(self, "wavenumbers", wave)
        if profile.shape != (self.grid.n_slots,):
            raise ValueError("profile must have one entry per slot")
        if wave.shape[1] != self.grid.n_slots:
            raise ValueError("wavenumbers must be (n_coords, n_slots)")
        if not 0 <= self.coordinate < wave.shape[0]:
            raise ValueError("coordinate index out of range")

    @property
    def n_coords(self) -> int:
        return self.wavenumbers.shape[0]

    def evaluate(self, x) -> np.ndarray:
        """G(x) as a slot-amplitude vector."""
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (self.n_coords,):
            raise ValueError(f"configuration must have {self.n_coords} coordinates")
        phase = np.exp(-1j * (x @ self.wavenumbers))
        return self.profile * phase

    def derivative(self, x, coord: int) -> np.ndarray:
        """Analytic d/dx_coord of x -> G(x)."""
        return -1j * self.wavenumbers[coord] * self.evaluate(x)

    def derivative_family(self, coord: int | None = None) -> "CouplingFamily":
        """The family x -> dG/dx_coord (defaults to the owning coordinate)."""
        c = self.coordinate if coord is None else coord
        return CouplingFamily(
            self.grid,
            -1j * self.wavenumbers[c] * self.profile,
            self.wavenumbers,
            self.coordinate,
            self.particle_index,
            self.component,
            f"d_{c} {self.label}",
        )

    def times_omega(self) -> "CouplingFamily":
        """The family x -> omega * G(x) (slotwise dispersion multiple)."""
        return CouplingFamily(
            self.grid,
            self.grid.slot_omega * self.profile,
            self.wavenumbers,
            self.coordinate,
            self.particle_index,
            self.component,
            f"omega {self.label}",
        )

    def times(self, factor: complex) -> "CouplingFamily":
        return CouplingFamily(
            self.grid,
            factor * self.profile,
            self.wavenumbers,
            self.coordinate,
            self.particle_index,
            self.component,
            self.label,
        )

    def omega_norm_value(self) -> float:
        """||G(x)||_omega; independent of x since the phase is unimodular."""
        return omega_norm(self.grid, self.profile)

    def max_wave_index(self, box_length: float) -> int:
        """Largest Fourier index |m| with wave = 2 pi m / L, over all entries."""
        idx = self.wavenumbers * box_length / (2.0 * np.pi)
        return int(np.rint(np.max(np.abs(idx)))) if idx.size else 0


def evaluate_coupling(family: CouplingFamily, x) -> np.ndarray:
    return family.evaluate(x)


def magnetic_coupling(family: CouplingFamily, x) -> np.ndarray:
    """Evaluate a magnetic-type family; identical rule, cross-product profile."""
    return family.evaluate(x)


def _resolve_rho(rho, grid: ModeGrid) -> np.ndarray:
    if rho is None:
        return np.ones(grid.n_modes, dtype=complex)
    if callable(rho):
        return np.array([rho(k) for k in grid.momenta], dtype=complex)
    rho = np.asarray(rho, dtype=complex).ravel()
    if rho.shape != (grid.n_modes,):
        raise ValueError("form factor must have one value per mode")
    return rho


def reciprocal_mode_grid(
    box_length: float,
    dim: int,
    max_index: int,
    photon_mass: float = 0.0,
    polarization_count: int = 1,
    radial_cutoff: float | None = None,
) -> ModeGrid:
    """Modes on the reciprocal lattice (2 pi / L) Z^dim with |index| <= max_index.

    These are exactly the wave vectors representable as Fourier modes of a
    periodic box of side L, so coupling phases stay band-limited on a matching
    spatial grid.  The k = 0 point is dropped when photon_mass = 0.  Weights
    are the reciprocal-cell volume (2 pi / L)^dim.
    """
    base = 2.0 * np.pi / box_length
    ks = []
    for idx in itertools.product(range(-max_index, max_index + 1), repeat=dim):
        k = base * np.asarray(idx, dtype=float)
        if photon_mass == 0.0 and not np.any(k):
            continue
        if radial_cutoff is not None and np.linalg.norm(k) > radial_cutoff:
            continue
        ks.append(k)
    ks.sort(key=tuple)
    momenta = np.asarray(ks)
    weights = np.full(len(ks), base**dim)
    return ModeGrid(momenta, weights, polarization_count, photon_mass)


def line_couplings(grid: ModeGrid, n_particles: int, rho=None) -> list[CouplingFamily]:
    """Scalar couplings for particles on a line (one coordinate each).

    G_j(x)(k) = rho(k) omega(k)^{-1/2} exp(-i k x_j); requires a 1-d momentum
    grid with a single polarization label.
    """
    if grid.momentum_dim != 1 or grid.polarization_count != 1:
        raise ValueError("line couplings need 1-d momenta and one polarization")
    rho = _resolve_rho(rho, grid)
    profile = rho / np.sqrt(grid.omega)
    families = []
    for j in range(n_particles):
        wave = np.zeros((n_particles, grid.n_slots))
        wave[j] = grid.momenta[:, 0]
        families.append(
            CouplingFamily(grid, profile, wave, coordinate=j, particle_index=j,
                           component=0, label=f"G_{j}")
        )
    return families


def qed_couplings(
    grid: ModeGrid, n_particles: int, rho=None
) -> tuple[list[CouplingFamily], list[CouplingFamily]]:
    """Vector-potential and magnetic-field families for particles in 3-space.

    For particle j and component a:
        G_{j,a}(x)(k, l) = rho(k) omega(k)^{-1/2} exp(-i k . x_j) eps_a(l, k)
        E_{j,a}(x)(k, l) = -i rho(k) omega(k)^{-1/2} exp(-i k . x_j) (k ^ eps(l, k))_a
    Coordinates are grouped particle-major: coordinate 3 j + a.  Requires a
    3-d momentum grid with two polarization labels.
    """
    if grid.momentum_dim != 3 or grid.polarization_count != 2:
        raise ValueError("radiation couplings need 3-d momenta and 2 polarizations")
    rho = _resolve_rho(rho, grid)
    eps = np.empty((grid.n_modes, 2, 3))
    keps = np.empty((grid.n_modes, 2, 3))
    for i, k in enumerate(grid.momenta):
        e1, e2 = build_polarizations(k)
        eps[i, 0], eps[i, 1] = e1, e2
        keps[i, 0], keps[i, 1] = np.cross(k, e1), np.cross(k, e2)
    scale = (rho / np.sqrt(grid.omega))[:, None]          # (M, 1) over pol
    n_coords = 3 * n_particles
    vector, magnetic = [], []
    for j in range(n_particles):
        wave = np.zeros((n_coords, grid.n_slots))
        for b in range(3):
            wave[3 * j + b] = np.repeat(grid.momenta[:, b], 2)
        for a in range(3):
            g_prof = (scale * eps[:, :, a]).ravel()
            e_prof = (-1j * scale * keps[:, :, a]).ravel()
            vector.append(CouplingFamily(grid, g_prof, wave, coordinate=3 * j + a,
                                         particle_index=j, component=a,
                                         label=f"G_{j},{a}"))
            magnetic.append(CouplingFamily(grid, e_prof, wave, coordinate=3 * j + a,
                                           particle_index=j, component=a,
                                           label=f"E_{j},{a}"))
    return vector, magnetic
