import itertools
from math import comb, factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from pfcheck import fock as fk
from pfcheck import one_particle as op


def single_slot_basis(cutoff, omega=1.0, weight=1.0):
    grid = op.ModeGrid([[omega]], [weight], photon_mass=0.0)
    return fk.FockBasis(grid, cutoff)


def two_slot_basis(cutoff, weights=(0.7, 1.3)):
    grid = op.ModeGrid([[1.0], [2.0]], list(weights), photon_mass=0.0)
    return fk.FockBasis(grid, cutoff)


# ---------------------------------------------------------------------------
# basis enumeration


def test_dimension_is_binomial():
    for slots, cutoff in [(1, 4), (2, 3), (3, 5), (6, 5)]:
        grid = op.ModeGrid([[float(i + 1)] for i in range(slots)],
                           np.ones(slots))
        basis = fk.FockBasis(grid, cutoff)
        assert basis.dim == comb(slots + cutoff, cutoff)


def test_graded_lexicographic_order():
    basis = two_slot_basis(3)
    totals = basis.totals
    assert all(a <= b for a, b in zip(totals, totals[1:]))
    for total in range(4):
        block = [tuple(s) for s in basis.states[totals == total]]
        assert block == sorted(block)
    # bijection
    for i, state in enumerate(basis.states):
        assert basis.index[tuple(state)] == i


# ---------------------------------------------------------------------------
# creation / annihilation


def test_creation_on_vacuum_places_h_with_weighted_norm():
    basis = two_slot_basis(3)
    h = np.array([1.0 + 0.5j, -2.0j])
    out = fk.creation(basis, h).apply(basis.vacuum())
    one_quantum = basis.totals == 1
    assert np.abs(out[~one_quantum]).max() == 0.0
    assert_allclose(np.linalg.norm(out), op.norm(basis.grid, h), rtol=1e-14)


def test_single_slot_ladder_matrix():
    basis = single_slot_basis(4)
    adag = fk.creation(basis, np.array([1.0])).toarray()
    expected = np.diag(np.sqrt([1.0, 2.0, 3.0, 4.0]), k=-1)
    assert_allclose(adag, expected, atol=1e-15)


def test_creation_truncates_top_sector():
    basis = two_slot_basis(2)
    top = basis.basis_vector((2, 0))
    assert np.abs(fk.creation(basis, np.array([1.0, 1.0])).apply(top)).max() == 0.0


# symmetrized-tensor oracle ---------------------------------------------------

def _tensor_inner(weights, t, u, n):
    if n == 0:
        return complex(np.conj(t) * u)
    w = np.ones(t.shape)
    for axis in range(n):
        shape = [1] * n
        shape[axis] = len(weights)
        w = w * np.asarray(weights).reshape(shape)
    return complex(np.sum(w * np.conj(t) * u))


def _symmetrize(t, n):
    if n <= 1:
        return t
    out = np.zeros_like(t)
    for perm in itertools.permutations(range(n)):
        out = out + np.transpose(t, perm)
    return out / factorial(n)


def _occupation_tensor(weights, occ):
    n = sum(occ)
    if n == 0:
        return np.array(1.0 + 0.0j)
    slots = [s for s, ns in enumerate(occ) for _ in range(ns)]
    t = np.zeros((len(occ),) * n, dtype=complex)
    t[tuple(slots)] = 1.0
    t = _symmetrize(t, n)
    return t / np.sqrt(_tensor_inner(weights, t, t, n).real)


def _oracle_element(weights, h, occ_from, occ_to):
    """<occ_to| a*(h) |occ_from> from sqrt(n+1) S_{n+1} (h tensor psi)."""
    n = sum(occ_from)
    psi = _occupation_tensor(weights, occ_from)
    h = np.asarray(h, dtype=complex)
    raised = np.tensordot(h, psi, axes=0) if n else h
    raised = np.sqrt(n + 1.0) * _symmetrize(raised, n + 1)
    return _tensor_inner(weights, _occupation_tensor(weights, occ_to), raised, n + 1)


def test_creation_elements_match_symmetrized_tensor_oracle(rng):
    basis = two_slot_basis(3)
    h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    mat = fk.creation(basis, h).matrix
    for i, occ in enumerate(basis.states):
        for s in range(2):
            target = occ.copy()
            target[s] += 1
            if target.sum() > basis.quanta_cutoff:
                continue
            j = basis.index[tuple(target)]
            want = _oracle_element(basis.grid.quadrature_weights, h,
                                   tuple(occ), tuple(target))
            assert abs(mat[j, i] - want) < 1e-13


def test_annihilation_kills_vacuum_and_is_adjoint():
    basis = two_slot_basis(3)
    h = np.array([0.3 - 1.0j, 0.8])
    a = fk.annihilation(basis, h)
    assert np.abs(a.apply(basis.vacuum())).max() == 0.0
    diff = a.matrix - fk.creation(basis, h).matrix.conj().T
    assert np.abs(diff.toarray()).max() < 1e-15


def test_a_adag_on_vacuum_gives_inner_product():
    basis = two_slot_basis(3)
    h = np.array([1.0, 2.0j])
    g = np.array([0.5j, 1.0])
    out = fk.annihilation(basis, h).apply(
        fk.creation(basis, g).apply(basis.vacuum()))
    expected = op.inner(basis.grid, h, g) * basis.vacuum()
    assert_allclose(out, expected, atol=1e-14)


# ---------------------------------------------------------------------------
# field operator


def test_field_zero_amplitude_is_zero():
    basis = two_slot_basis(2)
    assert fk.field(basis, np.zeros(2)).matrix.nnz == 0


def test_field_hermitian():
    basis = two_slot_basis(3)
    h = np.array([1.0 + 2.0j, -0.5j])
    assert fk.field(basis, h).hermiticity_defect() < 1e-15


def test_field_single_slot_tridiagonal_oracle():
    basis = single_slot_basis(5)
    phi = fk.field(basis, np.array([1.0])).toarray()
    n = np.arange(5)
    ladder = np.diag(np.sqrt(n + 1.0), k=-1)
    oracle = (ladder + ladder.T) / np.sqrt(2.0)
    assert_allclose(phi, oracle, atol=1e-15)


# ---------------------------------------------------------------------------
# diagonal second quantization


def test_number_operator_eigenvalue():
    basis = two_slot_basis(3)
    nop = fk.second_quantization_diagonal(basis, np.ones(2))
    v = basis.basis_vector((2, 1))
    assert_allclose(nop.apply(v), 3.0 * v)


def test_field_energy_on_vacuum_is_zero():
    basis = two_slot_basis(3)
    assert np.abs(fk.field_energy(basis).apply(basis.vacuum())).max() == 0.0


def test_diagonal_energy_example():
    grid = op.ModeGrid([[1.0], [2.0], [0.5]], np.ones(3))
    basis = fk.FockBasis(grid, 3)
    hf = fk.second_quantization_diagonal(basis, np.array([1.0, 2.0, 0.5]))
    v = basis.basis_vector((1, 0, 2))
    assert_allclose(hf.apply(v), 2.0 * v)


def test_diagonal_rejects_nonfinite():
    basis = two_slot_basis(2)
    with pytest.raises(ValueError):
        fk.second_quantization_diagonal(basis, np.array([1.0, np.inf]))


# ---------------------------------------------------------------------------
# invariants (safe-sector commutation relations, appendix bound)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=3))
def test_ccr_on_safe_sectors_property(seed):
    rng = np.random.default_rng(seed)
    basis = two_slot_basis(4)
    f = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    g = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    cf, cg = fk.creation(basis, f), fk.creation(basis, g)
    af = cf.H
    proj = fk.sector_projection(basis, basis.quanta_cutoff - 2).matrix
    comm = af.matrix @ cg.matrix - cg.matrix @ af.matrix
    eye = np.eye(basis.dim)
    defect = proj @ (comm.toarray() - op.inner(basis.grid, f, g) * eye) @ proj
    assert np.abs(defect).max() < 1e-12


def test_annihilation_field_energy_bound(rng):
    # ||a(f) psi|| <= ||f / sqrt(omega)|| ||H_f^{1/2} psi||, exact on the
    # truncation with no boundary caveat (a lowers quanta)
    basis = two_slot_basis(4)
    grid = basis.grid
    f = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    a = fk.annihilation(basis, f)
    weight = np.sqrt(np.sum(grid.slot_weight * np.abs(f) ** 2 / grid.slot_omega))
    hf_half = np.sqrt(basis.field_energies())
    for i in range(basis.dim):
        v = np.zeros(basis.dim, dtype=complex)
        v[i] = 1.0
        assert np.linalg.norm(a.apply(v)) <= weight * hf_half[i] + 1e-12
    for _ in range(100):
        v = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        lhs = np.linalg.norm(a.apply(v))
        rhs = weight * np.linalg.norm(hf_half * v)
        assert lhs <= rhs + 1e-12


def test_hf_commutator_on_safe_sectors(rng):
    basis = two_slot_basis(4)
    h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    hf = fk.field_energy(basis)
    phi = fk.field(basis, h)
    rhs = fk.field(basis, 1j * basis.grid.slot_omega * h)
    proj = fk.sector_projection(basis, basis.quanta_cutoff - 1).matrix
    defect = proj @ ((hf.matrix @ phi.matrix - phi.matrix @ hf.matrix)
                     + 1j * rhs.matrix) @ proj
    assert np.abs(defect.toarray()).max() < 1e-12


def test_quanta_reach_composes():
    basis = two_slot_basis(3)
    h = np.array([1.0, 1.0])
    phi = fk.field(basis, h)
    assert phi.quanta_reach == 1
    assert (phi @ phi).quanta_reach == 2
    assert (phi + phi).quanta_reach == 1
    assert fk.field_energy(basis).quanta_reach == 0


def test_triplet_export_roundtrip(tmp_path, rng):
    basis = two_slot_basis(3)
    h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    phi = fk.field(basis, h)
    path = tmp_path / "phi.txt"
    fk.write_triplets(phi, path)
    rebuilt = np.zeros((basis.dim, basis.dim), dtype=complex)
    for line in path.read_text().splitlines()[1:]:
        r, c, re, im = line.split()
        rebuilt[int(r), int(c)] = float(re) + 1j * float(im)
    assert_allclose(rebuilt, phi.toarray(), atol=0)
