"""Operators on the composite space (spatial grid) x (spin) x (Fock).

Assembles the position-dependent field Phi(G), the minimally coupled kinetic
operator T_A = sum_j (p_j + A_j)^2 + H_f, the full Hamiltonian with spin-field
and Coulomb terms, the field-energy resolvents R_alpha = (alpha H_f + 1)^{-1},
and the bounded commutator families E_{alpha,j}, F_alpha used by the resolvent
identity checks.

Phi(G) is block diagonal over grid points x with blocks phi(G(x)); here it is
composed slotwise as sum_s sqrt(w_s/2) [conj(u_s) E_s^* (x) a_s
+ u_s E_s(x) a*_s] with E_s the unimodular phase of slot s, which is the same
operator with matvec cost linear in the number of slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import fock as fk
from .linops import (FockFactorOp, FourierMultiplier, IdentityOp, LinOp,
                     ProductOp, SpatialMultiplier, SpinFactorOp, SumOp)
from .one_particle import CouplingFamily
from .particle import SpatialGrid, laplacian_symbol, momentum_symbol

__all__ = [
    "CompositeSpace",
    "big_field",
    "momentum_op",
    "laplacian_op",
    "fock_lift",
    "field_energy_op",
    "hf_function_op",
    "resolvent_family",
    "coupling_inner_values",
    "assemble_TA",
    "assemble_pauli_fierz",
    "step1_commutator_operators",
    "safe_projector",
    "pauli_matrix",
    "spin_operator",
    "quadratic_form",
]

PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


def pauli_matrix(a: int) -> np.ndarray:
    return PAULI[a].copy()


@dataclass(frozen=True)
class CompositeSpace:
    """Fixed factor ordering spatial x spin x Fock, spatial index fastest."""

    spatial: SpatialGrid
    fock: fk.FockBasis
    n_particles: int = 1
    spin: bool = False
    dimension_budget: int = 5_000_000

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.spatial.n_coords % self.n_particles:
            raise ValueError("coordinates do not split evenly into particles")
        if self.dim > self.dimension_budget:
            raise ValueError(
                f"composite dimension {self.dim} exceeds budget {self.dimension_budget}"
            )

    @property
    def particle_dim(self) -> int:
        return self.spatial.n_coords // self.n_particles

    @property
    def spin_dim(self) -> int:
        return 2**self.n_particles if self.spin else 1

    @property
    def shape(self) -> tuple:
        return (self.fock.dim, self.spin_dim, self.spatial.shape)

    @property
    def full_shape(self) -> tuple[int, ...]:
        return (self.fock.dim, self.spin_dim) + self.spatial.shape

    @property
    def dim(self) -> int:
        return self.fock.dim * self.spin_dim * self.spatial.size

    def identity(self) -> LinOp:
        return IdentityOp(self.shape)

    def random_vector(self, rng) -> np.ndarray:
        v = rng.standard_normal(self.full_shape) + 1j * rng.standard_normal(self.full_shape)
        return v / np.linalg.norm(v)

    def check_band_limit(self, family: CouplingFamily, margin: int = 0) -> None:
        """Reject couplings too wide for the grid (Nyquist rule)."""
        limit = self.spatial.max_band_index - margin
        idx = family.max_wave_index(self.spatial.length)
        if idx > limit:
            raise ValueError(
                f"coupling bandwidth index {idx} violates the Nyquist rule "
                f"(largest usable index {limit})"
            )
        base = 2.0 * np.pi / self.spatial.length
        lattice = base * np.rint(family.wavenumbers / base)
        if np.max(np.abs(family.wavenumbers - lattice)) > 1e-9 * base:
            raise ValueError("coupling wavenumber is not a grid Fourier mode")


def momentum_op(space: CompositeSpace, axis: int) -> LinOp:
    """p_axis = -i d/dx_axis, diagonal in the Fourier basis."""
    return FourierMultiplier(space.shape, momentum_symbol(space.spatial, axis))


def laplacian_op(space: CompositeSpace) -> LinOp:
    """p^2 = sum_j p_j^2."""
    return FourierMultiplier(space.shape, laplacian_symbol(space.spatial))


def fock_lift(space: CompositeSpace, op: fk.FockOperator) -> LinOp:
    return FockFactorOp(space.shape, op.matrix, op.quanta_reach, op.hermitian)


def field_energy_op(space: CompositeSpace) -> LinOp:
    return fock_lift(space, fk.field_energy(space.fock))


def hf_function_op(space: CompositeSpace, fn) -> LinOp:
    """Entrywise function of the field energy (exact on the diagonal)."""
    values = np.asarray([fn(e) for e in space.fock.field_energies()], dtype=complex)
    herm = bool(np.all(values.imag == 0.0))
    return FockFactorOp(space.shape, sparse.diags(values).tocsr(), 0, herm)


def resolvent_family(space: CompositeSpace, alpha: float) -> LinOp:
    """R_alpha = (alpha H_f + 1)^{-1}; entries in (0, 1], strong limit 1."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return hf_function_op(space, lambda e: 1.0 / (alpha * e + 1.0))


def _phase_values(space: CompositeSpace, wave_row: np.ndarray) -> np.ndarray:
    """exp(-i sum_c wave[c] x_c) over the grid."""
    coords = space.spatial.coordinates()  # (shape..., n_coords)
    return np.exp(-1j * np.tensordot(coords, wave_row, axes=([-1], [0])))


def big_field(space: CompositeSpace, family: CouplingFamily) -> LinOp:
    """Phi(G): block phi(G(x)) at each grid point x; Hermitian, grading +-1."""
    space.check_band_limit(family)
    basis = space.fock
    band = family.max_wave_index(space.spatial.length)
    terms = []
    amp = np.sqrt(basis.grid.slot_weight / 2.0)
    for s in range(basis.n_slots):
        u = family.profile[s]
        if abs(u) < 1e-300:
            continue
        phase = _phase_values(space, family.wavenumbers[:, s])
        raise_s = FockFactorOp(space.shape, basis.elementary_raising(s), 1)
        lower_s = FockFactorOp(space.shape, basis.elementary_raising(s).conj().T.tocsr(), 1)
        mult = SpatialMultiplier(space.shape, phase, band_reach=band)
        mult_c = SpatialMultiplier(space.shape, phase.conj(), band_reach=band)
        terms.append((amp[s] * u, ProductOp([mult, raise_s])))
        terms.append((amp[s] * np.conj(u), ProductOp([mult_c, lower_s])))
    if not terms:
        zero = sparse.csr_matrix((basis.dim, basis.dim), dtype=complex)
        return FockFactorOp(space.shape, zero, 0, hermitian=True)
    return SumOp(terms, hermitian=True)


def coupling_inner_values(space: CompositeSpace, fam_f: CouplingFamily,
                          fam_g: CouplingFamily, omega_weight: bool = False) -> np.ndarray:
    """(F(x), G(x))_h over the grid (optionally (omega F(x), G(x))_h).

    Conjugate-linear in the first family.  Returns a complex grid array.
    """
    grid = fam_f.grid
    w = grid.slot_weight * (grid.slot_omega if omega_weight else 1.0)
    out = np.zeros(space.spatial.shape, dtype=complex)
    for s in range(grid.n_slots):
        coeff = w[s] * np.conj(fam_f.profile[s]) * fam_g.profile[s]
        if abs(coeff) < 1e-300:
            continue
        wave = fam_g.wavenumbers[:, s] - fam_f.wavenumbers[:, s]
        out += coeff * _phase_values(space, wave)
    return out


def _coupling_by_coordinate(space: CompositeSpace, couplings) -> dict[int, CouplingFamily]:
    table: dict[int, CouplingFamily] = {}
    for fam in couplings:
        if fam.coordinate in table:
            raise ValueError(f"two couplings claim coordinate {fam.coordinate}")
        if fam.n_coords != space.spatial.n_coords:
            raise ValueError("coupling coordinate count does not match the grid")
        table[fam.coordinate] = fam
    return table


def minimal_momentum_ops(space: CompositeSpace, couplings) -> list[LinOp]:
    """(p_c + A_c) per coordinate c; coordinates without coupling get bare p_c."""
    table = _coupling_by_coordinate(space, couplings)
    ops = []
    for c in range(space.spatial.n_coords):
        p = momentum_op(space, c)
        if c in table:
            ops.append(SumOp([(1.0, p), (1.0, big_field(space, table[c]))],
                             hermitian=True))
        else:
            ops.append(p)
    return ops


def assemble_TA(space: CompositeSpace, couplings) -> LinOp:
    """T_A = sum_c (p_c + A_c)^2 + H_f as a Hermitian operator DAG."""
    pa = minimal_momentum_ops(space, couplings)
    terms = [(1.0, ProductOp([op, op], hermitian=True)) for op in pa]
    terms.append((1.0, field_energy_op(space)))
    return SumOp(terms, hermitian=True)


def quadratic_form(space: CompositeSpace, couplings, u: np.ndarray,
                   v: np.ndarray) -> complex:
    """q(u, v) = sum_c ((p_c + A_c) u, (p_c + A_c) v) + (H_f^{1/2} u, H_f^{1/2} v).

    Direct bilinear evaluation, independent of the T_A operator route.
    """
    total = 0.0 + 0.0j
    for op in minimal_momentum_ops(space, couplings):
        total += np.vdot(op.apply(u), op.apply(v))
    hf_half = hf_function_op(space, np.sqrt)
    total += np.vdot(hf_half.apply(u), hf_half.apply(v))
    return complex(total)


def spin_operator(space: CompositeSpace, particle: int, component: int) -> LinOp:
    """sigma_{particle, component} acting on the spin factor."""
    if not space.spin:
        raise ValueError("spin is disabled for this space")
    mat = np.array([[1.0]], dtype=complex)
    for j in range(space.n_particles):
        factor = PAULI[component] if j == particle else np.eye(2, dtype=complex)
        mat = np.kron(mat, factor)
    return SpinFactorOp(space.shape, mat)


def assemble_pauli_fierz(
    space: CompositeSpace,
    couplings,
    magnetic_couplings=None,
    potential_values=None,
    masses=None,
    charges=None,
) -> LinOp:
    """Full Hamiltonian: kinetic minimal coupling, field energy, spin-field
    term and Coulomb potential.

        sum_j (p_j - e_j A_j)^2 / (2 m_j) + H_f
        + sum_{j,a} (e_j / (2 m_j)) sigma_{j,a} B_{j,a} + V_c

    With all charges zero and no potential this reduces to
    sum_j p_j^2 / (2 m_j) + H_f.
    """
    n = space.n_particles
    masses = np.ones(n) if masses is None else np.asarray(masses, dtype=float)
    charges = np.ones(n) if charges is None else np.asarray(charges, dtype=float)
    if masses.shape != (n,) or charges.shape != (n,):
        raise ValueError("need one mass and one charge per particle")
    if np.any(masses <= 0):
        raise ValueError("masses must be positive")

    table = _coupling_by_coordinate(space, couplings)
    dp = space.particle_dim
    terms = []
    for c in range(space.spatial.n_coords):
        j = c // dp
        p = momentum_op(space, c)
        if c in table and charges[j] != 0.0:
            kin = SumOp([(1.0, p),
                         (1.0, big_field(space, table[c].times(-charges[j])))],
                        hermitian=True)
        else:
            kin = p
        terms.append((1.0 / (2.0 * masses[j]), ProductOp([kin, kin], hermitian=True)))
    terms.append((1.0, field_energy_op(space)))

    if magnetic_couplings:
        if not space.spin:
            raise ValueError("magnetic couplings require the spin factor")
        if dp != 3:
            raise ValueError("the spin-field term needs three components per particle")
        for fam in magnetic_couplings:
            j, a = fam.particle_index, fam.component
            if charges[j] == 0.0:
                continue
            coeff = charges[j] / (2.0 * masses[j])
            terms.append((coeff, ProductOp(
                [spin_operator(space, j, a), big_field(space, fam)],
                hermitian=True)))

    if potential_values is not None:
        terms.append((1.0, SpatialMultiplier(space.shape,
                                             np.asarray(potential_values, dtype=float))))
    return SumOp(terms, hermitian=True)


def step1_commutator_operators(space: CompositeSpace, alpha: float, couplings):
    """The bounded operator families of the resolvent commutator identity.

        E_c     = -i alpha R_alpha Pi_c R_alpha            (= [A_c, R_alpha])
        F_alpha = sum_c [ -2 alpha^2 R (Pi_c R)^2 ]
                  + alpha R^2 sum_c (omega G_c, G_c)_h
                  + i [R, Phi(sum_c d_c G_c)]

    with Pi_c = Phi(i omega G_c).  The (omega G, G) term enters with a plus
    sign: that is the sign consistent with a*(h) linear in h and the inner
    product conjugate-linear in its first slot, as used throughout.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    R = resolvent_family(space, alpha)
    e_ops = []
    f_terms = []
    div_terms = []
    inner_sum = np.zeros(space.spatial.shape, dtype=complex)
    for fam in couplings:
        pi = big_field(space, fam.times_omega().times(1j))
        e_ops.append(SumOp([(-1j * alpha, ProductOp([R, pi, R]))]))
        f_terms.append((-2.0 * alpha**2, ProductOp([R, pi, R, pi, R])))
        inner_sum += coupling_inner_values(space, fam, fam, omega_weight=True)
        div_terms.append((1.0, big_field(space, fam.derivative_family())))
    if np.max(np.abs(inner_sum.imag)) > 1e-12 * max(1.0, np.max(np.abs(inner_sum))):
        raise ValueError("(omega G, G) should be real")
    band = max((fam.max_wave_index(space.spatial.length) for fam in couplings), default=0)
    gg = SpatialMultiplier(space.shape, inner_sum.real, band_reach=2 * band)
    f_terms.append((alpha, ProductOp([gg, R, R])))
    phi_div = SumOp(div_terms) if div_terms else None
    if phi_div is not None:
        f_terms.append((1j, ProductOp([R, phi_div])))
        f_terms.append((-1j, ProductOp([phi_div, R])))
    return e_ops, SumOp(f_terms, hermitian=True)


def safe_projector(space: CompositeSpace, quanta_margin: int = 0,
                   band_margin: int = 0) -> LinOp:
    """Projection onto the sectors where truncated identities are exact.

    Keeps total quanta <= N_max - quanta_margin and, when a band margin is
    requested, spatial Fourier indices |m| <= max symmetric index - margin
    on every axis (the asymmetric Nyquist index is dropped whenever any band
    margin is active).
    """
    basis = space.fock
    keep = basis.totals <= basis.quanta_cutoff - quanta_margin
    proj = FockFactorOp(space.shape, sparse.diags(keep.astype(complex)).tocsr(),
                        0, hermitian=True)
    if band_margin <= 0:
        return proj
    limit = space.spatial.max_band_index - band_margin
    if limit < 0:
        raise ValueError("band margin exhausts the Fourier band")
    idx = space.spatial.axis_indices()
    mask1d = (np.abs(idx) <= limit).astype(float)
    mask = np.ones(space.spatial.shape)
    for axis in range(space.spatial.n_coords):
        shape = [1] * space.spatial.n_coords
        shape[axis] = space.spatial.points
        mask = mask * mask1d.reshape(shape)
    return ProductOp([proj, FourierMultiplier(space.shape, mask)], hermitian=True)
