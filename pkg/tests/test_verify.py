import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import sparse

from conftest import desk_setup
from pfcheck import fock as fk
from pfcheck import one_particle as op
from pfcheck import pauli_fierz as pf
from pfcheck import verify as vf


def six_slot_basis(cutoff=5):
    grid = op.ModeGrid([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.5, 0.0]],
                       [1.0, 0.8, 1.2], polarization_count=2)
    return fk.FockBasis(grid, cutoff)


# ---------------------------------------------------------------------------
# operator norm


def test_operator_norm_identity(rng):
    eye = sparse.identity(50, format="csr", dtype=complex)
    value, info = vf.operator_norm(eye, rng=rng)
    assert abs(value - 1.0) < 1e-8
    assert info.converged


def test_operator_norm_diagonal(rng):
    mat = sparse.diags([3.0, -4.0]).astype(complex).tocsr()
    value, _ = vf.operator_norm(mat, rng=rng)
    assert abs(value - 4.0) < 1e-8


def test_operator_norm_zero(rng):
    mat = sparse.csr_matrix((20, 20), dtype=complex)
    value, info = vf.operator_norm(mat, rng=rng)
    assert value == 0.0 and info.converged


def test_operator_norm_vs_dense_svd_oracle(rng):
    mat = sparse.random(200, 200, density=0.05, random_state=7,
                        dtype=float).astype(complex)
    mat = (mat + 1j * sparse.random(200, 200, density=0.05,
                                    random_state=8)).tocsr()
    value, info = vf.operator_norm(mat, tolerance=1e-10, rng=rng,
                                   max_iter=20000)
    oracle = np.linalg.svd(mat.toarray(), compute_uv=False)[0]
    assert info.converged
    assert abs(value - oracle) < 1e-8 * oracle


def test_operator_norm_certificate(rng):
    mat = sparse.diags(np.linspace(0.1, 2.0, 30)).astype(complex).tocsr()
    value, info = vf.operator_norm(mat, rng=rng)
    x = info.certificate
    assert np.linalg.norm(mat @ x) / np.linalg.norm(x) > value * (1 - 1e-6)


# ---------------------------------------------------------------------------
# commutator suites


def test_ccr_suite_passes(rng):
    results = vf.check_ccr_suite(six_slot_basis(), rng, n_pairs=10)
    assert {r.name for r in results} == {"ccr_mixed", "ccr_annihilation",
                                         "ccr_creation", "field_commutator"}
    for r in results:
        assert r.passed, (r.name, r.residual)
        assert r.residual < 1e-12


def test_field_commutator_explicit_example():
    # f = (1, 0), g = (i, 0), unit weights: [phi(f), phi(g)] = i Id on safe
    # sectors (Im (f, g) = 1)
    grid = op.ModeGrid([[1.0], [2.0]], [1.0, 1.0])
    basis = fk.FockBasis(grid, 5)
    f = np.array([1.0, 0.0], dtype=complex)
    g = np.array([1.0j, 0.0])
    phf, phg = fk.field(basis, f), fk.field(basis, g)
    comm = (phf.matrix @ phg.matrix - phg.matrix @ phf.matrix).toarray()
    proj = fk.sector_projection(basis, 3).matrix.toarray()
    defect = proj @ (comm - 1j * np.eye(basis.dim)) @ proj
    assert np.abs(defect).max() < 1e-13
    # f = g: commutator vanishes identically
    comm_ff = (phf.matrix @ phf.matrix - phf.matrix @ phf.matrix).toarray()
    assert np.abs(comm_ff).max() == 0.0


def test_field_energy_commutator_check(rng):
    res = vf.check_field_energy_commutators(six_slot_basis(), rng, n_inputs=10)
    assert res.passed and res.residual < 1e-10


# ---------------------------------------------------------------------------
# norm bounds


def test_field_bound_zero_amplitude(rng):
    basis = six_slot_basis(3)
    res = vf.check_field_bound(basis, np.zeros(6), rng=rng)
    assert res.passed and res.measured == 0.0 and res.bound == 0.0


def test_field_bound_single_mode_dense_oracle(rng):
    # single mode omega = 1, h = 1, N_max = 40: dense eigensolve of the
    # 41-dim truncation; bound sqrt(2) ||h||_omega = 2
    grid = op.ModeGrid([[1.0]], [1.0])
    basis = fk.FockBasis(grid, 40)
    res = vf.check_field_bound(basis, np.array([1.0]), rng=rng)
    assert res.passed
    proj = fk.sector_projection(basis, 39).matrix.toarray()
    shift = np.diag(1.0 / np.sqrt(basis.field_energies() + 1.0))
    dense = proj @ fk.field(basis, np.array([1.0])).toarray() @ shift @ proj
    oracle = np.linalg.svd(dense, compute_uv=False)[0]
    assert abs(res.measured - oracle) < 1e-8
    assert res.measured <= 2.0 + 1e-10


def test_field_bounds_random_batch(rng):
    basis = six_slot_basis(4)
    for _ in range(20):
        h = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        assert vf.check_field_bound(basis, h, rng=rng).passed


def test_quadratic_field_bound(rng):
    basis = six_slot_basis(4)
    res = vf.check_quadratic_field_bound(basis, np.zeros(6),
                                         np.ones(6), rng=rng)
    assert res.passed and res.measured == 0.0
    grid = op.ModeGrid([[1.0]], [1.0])
    b1 = fk.FockBasis(grid, 30)
    h = np.array([1.0])
    res = vf.check_quadratic_field_bound(b1, h, h, rng=rng)
    assert res.passed and res.measured <= 8.0 + 1e-10
    for _ in range(10):
        g = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        h6 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        assert vf.check_quadratic_field_bound(basis, g, h6, rng=rng).passed


def test_big_field_bound(rng):
    space, fams = desk_setup()
    res = vf.check_big_field_bound(space, fams[0], rng=rng)
    assert res.passed
    assert res.bound == pytest.approx(np.sqrt(2.0) * fams[0].omega_norm_value())


# ---------------------------------------------------------------------------
# composite identities


def test_leibniz_reduces_for_x_independent_coupling(rng):
    space, fams = desk_setup()
    fam = fams[0]
    const = op.CouplingFamily(fam.grid, fam.profile,
                              np.zeros_like(fam.wavenumbers), 0)
    res = vf.check_leibniz(space, [const], rng, n_vectors=5)
    assert res.passed and res.residual < 1e-13


def test_composite_commutator_checks(rng):
    space, fams = desk_setup()
    results = vf.check_composite_commutators(space, fams, rng, n_vectors=5)
    for r in results:
        assert r.passed, (r.name, r.residual)


def test_theorem2_checks(rng):
    space, fams = desk_setup()
    for r in vf.check_theorem2(space, fams, rng, n_vectors=20):
        assert r.passed and r.residual < 1e-11


def test_step1_checks(rng):
    space, fams = desk_setup()
    for r in vf.check_step1(space, fams, rng, n_pairs=9):
        assert r.passed, (r.name, r.residual, r.measured)


# ---------------------------------------------------------------------------
# non-commuting components


def rho_asym(k):
    return 1.5 if k[0] > 1e-12 else 1.0


def test_noncommuting_components_asymmetric_vs_symmetric(rng):
    space, _ = desk_setup(n_particles=2)
    grid = op.reciprocal_mode_grid(2 * np.pi, 1, 1)
    asym = op.line_couplings(grid, 2, rho_asym)
    results = vf.check_noncommuting_components(space, asym[0], asym[1], True, rng)
    assert all(r.passed for r in results)
    lower = next(r for r in results if r.name == "components_do_not_commute")
    assert lower.measured > 1e-6
    sym = op.line_couplings(grid, 2, None)
    results = vf.check_noncommuting_components(space, sym[0], sym[1], False, rng)
    assert all(r.passed for r in results)
    upper = next(r for r in results if r.name == "components_commute")
    assert upper.measured < 1e-12


# ---------------------------------------------------------------------------
# relative-bound constants and pencils


def test_relative_bound_free_case_exact(rng):
    space, fams = desk_setup()
    out = vf.relative_bound_constants(space, [f.times(0.0) for f in fams],
                                      [0.0], rng)
    assert abs(out[0].constants["C1"] - 1.0) < 1e-10
    assert out[0].constants["C2"] == 0.0
    assert out[0].resubstitution_ok


def test_relative_bound_monotone_in_shift(rng):
    space, fams = desk_setup()
    out = vf.relative_bound_constants(space, fams, [0.0, 1.0, 10.0], rng,
                                      use_iterative=False)
    values = [est.constants["C1"] for est in out]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))
    assert all(est.resubstitution_ok for est in out)


def test_pencil_iterative_matches_dense(rng):
    space, fams = desk_setup()
    out = vf.relative_bound_constants(space, fams, [1.0], rng,
                                      use_iterative=True)[0]
    gap = out.details["oracle_gap"]
    assert gap < 1e-8


def test_reverse_bound_infinite_at_zero_shift(rng):
    # p^2 + H_f kills the free ground state while T_A does not
    space, fams = desk_setup()
    out = vf.reverse_bound_constants(space, fams, [0.0, 1.0], rng,
                                     use_iterative=False)
    assert np.isinf(out[0].constants["D1"])
    assert np.isfinite(out[1].constants["D1"])


def test_reproducibility_of_constants(rng):
    space, fams = desk_setup()
    a = vf.relative_bound_constants(space, fams, [1.0],
                                    np.random.default_rng(5))[0]
    b = vf.relative_bound_constants(space, fams, [1.0],
                                    np.random.default_rng(5))[0]
    assert a.constants == b.constants


# ---------------------------------------------------------------------------
# step 2 lower bound


def test_step2_zero_coupling_nonnegative(rng):
    space, fams = desk_setup()
    res = vf.step2_lower_bound_check(space, [f.times(0.0) for f in fams], rng)
    assert res.passed
    assert res.details["mu"] >= -1e-12
    assert res.details["b"] == 0.0


def test_step2_reproducible(rng):
    space, fams = desk_setup()
    a = vf.step2_lower_bound_check(space, fams, np.random.default_rng(3))
    b = vf.step2_lower_bound_check(space, fams, np.random.default_rng(3))
    assert a.details["mu"] == b.details["mu"]
    assert abs(a.details["mu"]) < np.inf
    assert a.details["b_path"] >= a.details["b"] - 1e-9


# ---------------------------------------------------------------------------
# sweep and spectra


def test_sweep_free_row_only(rng):
    space, fams = desk_setup()
    sweep = vf.coupling_sweep(space, fams, [0.0], rng, use_iterative=False)
    row = sweep.rows[0]
    assert abs(row.c1 - 1.0) < 1e-10 and row.c2 == 0.0
    assert abs(row.d1 - 1.0) < 1e-10 and row.d2 == 0.0
    assert abs(row.ground_energy) < 1e-10
    assert row.b_step2 == 0.0
    assert sweep.free_row_exact
    assert row.ratio_sup == pytest.approx(1.0) and row.ratio_inf == pytest.approx(1.0)


def test_sweep_csv_deterministic():
    space, fams = desk_setup(points=8, quanta_cutoff=2)
    a = vf.coupling_sweep(space, fams, [0.0, 1.0], np.random.default_rng(9),
                          use_iterative=False)
    b = vf.coupling_sweep(space, fams, [0.0, 1.0], np.random.default_rng(9),
                          use_iterative=False)
    assert a.csv_lines() == b.csv_lines()


def test_lowest_ritz_free_case(rng):
    space, fams = desk_setup(points=8, quanta_cutoff=2)
    free = pf.assemble_TA(space, [f.times(0.0) for f in fams])
    vals, residuals, details = vf.lowest_ritz(free, 3, rng)
    assert abs(vals[0]) < 1e-10
    assert all(r < 1e-8 for r in residuals)
    assert details["oracle_gap"] < 1e-8
    with pytest.raises(ValueError):
        vf.lowest_ritz(free, space.dim, rng)


def test_graph_norm_ratios_free_are_one(rng):
    space, fams = desk_setup(points=8, quanta_cutoff=2)
    sup, inf = vf.graph_norm_ratios(space, [f.times(0.0) for f in fams],
                                    rng, n_vectors=10)
    assert sup == pytest.approx(1.0) and inf == pytest.approx(1.0)


def test_check_result_pass_rule_pure():
    assert vf.CheckResult.decide("residual", 1e-10, residual=5e-11)
    assert not vf.CheckResult.decide("residual", 1e-10, residual=2e-10)
    assert vf.CheckResult.decide("bound", 1e-10, measured=1.0, bound=1.0)
    assert not vf.CheckResult.decide("bound", 1e-10, measured=1.1, bound=1.0)
    assert vf.CheckResult.decide("lower_bound", 0.0, measured=2.0, bound=1.0)
    with pytest.raises(ValueError):
        vf.CheckResult.decide("???", 0.0)
