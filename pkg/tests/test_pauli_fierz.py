import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import corollary_setup, desk_setup
from pfcheck import fock as fk
from pfcheck import one_particle as op
from pfcheck import pauli_fierz as pf
from pfcheck import verify as vf
from pfcheck.linops import ProductOp, commutator
from pfcheck.particle import SpatialGrid


def test_composite_dimension_and_budget():
    space, _ = desk_setup()
    assert space.dim == 16 * 1 * space.fock.dim
    with pytest.raises(ValueError, match="budget"):
        pf.CompositeSpace(SpatialGrid(1, 16, 2 * np.pi), space.fock,
                          dimension_budget=10)


def test_big_field_zero_coupling_is_zero(rng):
    space, fams = desk_setup()
    zero = pf.big_field(space, fams[0].times(0.0))
    v = space.random_vector(rng)
    assert np.abs(zero.apply(v)).max() == 0.0


def test_big_field_constant_family_reduces_to_fock_field(rng):
    space, fams = desk_setup()
    fam = fams[0]
    const = op.CouplingFamily(fam.grid, fam.profile,
                              np.zeros_like(fam.wavenumbers), 0)
    big = pf.big_field(space, const)
    phi = fk.field(space.fock, fam.profile)
    v = space.random_vector(rng)
    out = big.apply(v)
    expected = np.tensordot(phi.toarray(), v, axes=([1], [0]))
    assert np.linalg.norm(out - expected) < 1e-13


def test_big_field_blocks_match_per_point_oracle():
    space, fams = desk_setup()
    dense = pf.big_field(space, fams[0]).to_dense(4096)
    xs = space.spatial.axis_coordinates()
    nf, points = space.fock.dim, space.spatial.points
    for ix in (0, 3, 11):
        idx = [f * points + ix for f in range(nf)]
        block = dense[np.ix_(idx, idx)]
        oracle = fk.field(space.fock, fams[0].evaluate([xs[ix]])).toarray()
        assert np.abs(block - oracle).max() < 1e-13


def test_big_field_hermitian(rng):
    space, fams = desk_setup()
    assert pf.big_field(space, fams[0]).adjoint_defect(rng) < 1e-13


def test_nyquist_violation_rejected():
    space, _ = desk_setup(points=4)
    grid = op.reciprocal_mode_grid(2 * np.pi, 1, 2)
    wide = op.line_couplings(grid, 1)[0]
    with pytest.raises(ValueError, match="Nyquist"):
        pf.big_field(space, wide)


def test_off_lattice_coupling_rejected():
    space, fams = desk_setup()
    fam = fams[0]
    skewed = op.CouplingFamily(fam.grid, fam.profile,
                               fam.wavenumbers * 1.037, 0)
    with pytest.raises(ValueError, match="Fourier mode"):
        pf.big_field(space, skewed)


def test_free_minimal_coupling_spectrum_is_sum_set():
    space, fams = desk_setup(points=8, quanta_cutoff=2)
    t_free = pf.assemble_TA(space, [f.times(0.0) for f in fams])
    dense = t_free.to_dense(4096)
    vals = np.sort(np.linalg.eigvalsh(0.5 * (dense + dense.conj().T)))
    kappa = space.spatial.axis_wavenumbers()
    field = space.fock.field_energies()
    expected = np.sort([k**2 + e for k in kappa for e in field])
    assert_allclose(vals, expected, atol=1e-10)


def test_assemble_ta_hermitian_and_nonnegative(rng):
    space, fams = desk_setup()
    t_a = pf.assemble_TA(space, fams)
    assert t_a.adjoint_defect(rng) < 1e-12
    vals, residuals, _ = vf.lowest_ritz(t_a, 1, rng)
    assert vals[0] >= -1e-10


def test_resolvent_family_properties(rng):
    space, _ = desk_setup()
    with pytest.raises(ValueError):
        pf.resolvent_family(space, 0.0)
    r = pf.resolvent_family(space, 2.0)
    entries = np.asarray(r.matrix.diagonal())
    assert np.all(entries.real > 0) and np.all(entries.real <= 1.0)
    # vacuum sector entry is exactly 1
    v = np.zeros(space.full_shape, dtype=complex)
    v[0, 0, 0] = 1.0
    assert_allclose(r.apply(v), v)
    value, _ = vf.operator_norm(r, rng=rng)
    assert value <= 1.0 + 1e-9
    # entrywise limit alpha -> 0 is the identity
    for alpha in (1e-3, 1e-6):
        r_small = pf.resolvent_family(space, alpha)
        gap = np.abs(np.asarray(r_small.matrix.diagonal()) - 1.0).max()
        assert gap < 10 * alpha * space.fock.field_energies().max()


def test_step1_operator_is_commutator(rng):
    space, fams = desk_setup()
    alpha = 0.7
    r = pf.resolvent_family(space, alpha)
    e_ops, _ = pf.step1_commutator_operators(space, alpha, fams)
    a = pf.big_field(space, fams[0])
    proj = pf.safe_projector(space, quanta_margin=1, band_margin=1)
    v = proj.apply(space.random_vector(rng))
    lhs = e_ops[0].apply(v)
    rhs = commutator(a, r).apply(v)
    assert np.linalg.norm(lhs - rhs) < 1e-12 * np.linalg.norm(v)
    # E is anti-Hermitian
    adj_gap = (e_ops[0] + e_ops[0].adjoint()).apply(v)
    assert np.linalg.norm(adj_gap) < 1e-12


def test_coupling_inner_values_match_pointwise():
    space, fams = desk_setup(n_particles=2)
    fa, fb = fams
    values = pf.coupling_inner_values(space, fa, fb, omega_weight=True)
    coords = space.spatial.coordinates()
    for idx in [(0, 0), (3, 7), (11, 2)]:
        x = coords[idx]
        direct = op.inner(fa.grid, fa.evaluate(x),
                          fa.grid.slot_omega * fb.evaluate(x))
        assert abs(values[idx] - direct) < 1e-13


def test_safe_projector_idempotent(rng):
    space, _ = desk_setup()
    proj = pf.safe_projector(space, quanta_margin=1, band_margin=2)
    v = space.random_vector(rng)
    once = proj.apply(v)
    assert np.linalg.norm(proj.apply(once) - once) < 1e-14
    with pytest.raises(ValueError, match="band margin"):
        pf.safe_projector(space, band_margin=99)


# ---------------------------------------------------------------------------
# full Hamiltonian assembly


def test_pauli_fierz_uncharged_reduces_to_free(rng):
    space, fams = desk_setup()
    ham = pf.assemble_pauli_fierz(space, fams, masses=[2.0], charges=[0.0])
    free = pf.laplacian_op(space) * (1.0 / 4.0) + pf.field_energy_op(space)
    v = space.random_vector(rng)
    assert np.linalg.norm(ham.apply(v) - free.apply(v)) < 1e-13


def test_pauli_fierz_free_ground_energy_zero(rng):
    space, fams = desk_setup()
    ham = pf.assemble_pauli_fierz(space, fams, charges=[0.0])
    vals, residuals, details = vf.lowest_ritz(ham, 1, rng)
    assert abs(vals[0]) < 1e-10
    assert details["oracle_gap"] < 1e-8


def test_pauli_fierz_rejects_bad_masses():
    space, fams = desk_setup()
    with pytest.raises(ValueError, match="positive"):
        pf.assemble_pauli_fierz(space, fams, masses=[-1.0])


def test_pauli_matrices_traceless_and_sigma_b_hermitian(rng):
    space, vector, magnetic = corollary_setup()
    for a in range(3):
        assert abs(np.trace(pf.pauli_matrix(a))) == 0.0
        sigma = pf.spin_operator(space, 0, a)
        assert abs(np.trace(sigma.matrix)) == 0.0
    term = pf.ProductOp(
        [pf.spin_operator(space, 0, 1), pf.big_field(space, magnetic[1])],
        hermitian=True)
    assert term.adjoint_defect(rng, trials=4) < 1e-12


def test_spin_field_term_lowers_ground_energy(rng):
    # the spin-field channel's second-order contribution is negative: with it
    # the ground energy sits strictly below the spinless minimal coupling at
    # the same charge, and below the pure diamagnetic first-order shift
    space, vector, magnetic = corollary_setup()
    e = 0.2
    with_spin = pf.assemble_pauli_fierz(space, vector, magnetic_couplings=magnetic,
                                        charges=[e])
    without = pf.assemble_pauli_fierz(space, vector, charges=[e])
    val_spin = vf.lowest_ritz(with_spin, 1, rng, dense_threshold=0)[0][0]
    val_plain = vf.lowest_ritz(without, 1, rng, dense_threshold=0)[0][0]
    assert val_spin < val_plain - 1e-6
    gs = np.zeros(space.full_shape, dtype=complex)
    gs[0, 0] += 1.0 / np.sqrt(space.spatial.size)
    diamagnetic = sum(
        np.vdot(pf.big_field(space, fam).apply(gs),
                pf.big_field(space, fam).apply(gs)).real for fam in vector)
    assert val_spin < e * e * diamagnetic / 2.0


def test_magnetic_couplings_require_spin():
    space, vector, magnetic = corollary_setup(spin=False)
    with pytest.raises(ValueError, match="spin"):
        pf.assemble_pauli_fierz(space, vector, magnetic_couplings=magnetic)
