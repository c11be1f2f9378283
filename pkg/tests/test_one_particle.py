import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from pfcheck import one_particle as op


def test_dispersion_pythagorean():
    grid = op.ModeGrid([[3.0, 4.0, 0.0]], [1.0])
    assert op.dispersion(grid, 0) == 5.0


def test_dispersion_massive_zero_mode():
    grid = op.ModeGrid([[0.0, 0.0, 0.0]], [1.0], photon_mass=1.0)
    assert op.dispersion(grid, 0) == 1.0


def test_massless_zero_mode_rejected():
    with pytest.raises(ValueError, match="zero-frequency"):
        op.ModeGrid([[0.0, 0.0, 0.0]], [1.0], photon_mass=0.0)


def test_grid_invariants():
    with pytest.raises(ValueError, match="positive"):
        op.ModeGrid([[1.0]], [0.0])
    with pytest.raises(ValueError, match="distinct"):
        op.ModeGrid([[1.0], [1.0]], [1.0, 1.0])


def test_omega_norm_values():
    grid = op.ModeGrid([[1.0]], [1.0], photon_mass=0.0)  # omega = 1
    assert_allclose(op.omega_norm(grid, np.array([1.0])), np.sqrt(2.0))
    grid4 = op.ModeGrid([[np.sqrt(15.0)]], [1.0], photon_mass=1.0)  # omega = 4
    assert_allclose(op.omega_norm(grid4, np.array([2.0])), np.sqrt(5.0))
    assert op.omega_norm(grid, np.array([0.0])) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10.0, allow_nan=False,
                                   allow_infinity=False),
                min_size=2, max_size=2),
       st.floats(min_value=0.1, max_value=10.0))
def test_omega_norm_dominates_plain_norm(amps, k):
    grid = op.ModeGrid([[k], [2.0 * k]], [0.5, 1.5])
    h = np.array(amps)
    assert op.omega_norm(grid, h) >= op.norm(grid, h) - 1e-14


def test_polarizations_canonical_frame():
    e1, e2 = op.build_polarizations([0.0, 0.0, 1.0])
    assert_allclose(e1, [1.0, 0.0, 0.0], atol=1e-15)
    assert_allclose(e2, [0.0, 1.0, 0.0], atol=1e-15)


def _assert_transverse_frame(k, e1, e2):
    khat = np.asarray(k, float) / np.linalg.norm(k)
    for a, b in [(e1, e1), (e2, e2)]:
        assert abs(a @ b - 1.0) < 1e-14
    for a, b in [(e1, e2), (e1, khat), (e2, khat)]:
        assert abs(a @ b) < 1e-14
    # right-handed triple
    assert_allclose(np.cross(e1, e2), khat, atol=1e-14)


def test_polarizations_reversed_axis():
    k = [0.0, 0.0, -1.0]
    _assert_transverse_frame(k, *op.build_polarizations(k))


def test_polarizations_diagonal_direction():
    k = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
    _assert_transverse_frame(k, *op.build_polarizations(k))


def test_polarizations_fallback_axis():
    # k parallel to the auxiliary axis exercises the documented fallback
    _assert_transverse_frame([2.0, 0.0, 0.0],
                             *op.build_polarizations([2.0, 0.0, 0.0]))


def test_polarizations_zero_vector_rejected():
    with pytest.raises(ValueError):
        op.build_polarizations([0.0, 0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-5.0, max_value=5.0), min_size=3, max_size=3))
def test_polarizations_property(kvec):
    k = np.asarray(kvec)
    if np.linalg.norm(k) < 1e-6:
        return
    _assert_transverse_frame(k, *op.build_polarizations(k))


def _line_family():
    grid = op.reciprocal_mode_grid(2.0 * np.pi, 1, 2)
    return op.line_couplings(grid, 1)[0]


def test_coupling_at_origin_is_profile():
    fam = _line_family()
    assert_allclose(op.evaluate_coupling(fam, [0.0]), fam.profile)
    grid = fam.grid
    assert_allclose(fam.profile, 1.0 / np.sqrt(grid.slot_omega))


def test_coupling_norm_independent_of_x(rng):
    fam = _line_family()
    ref = fam.omega_norm_value()
    for _ in range(10):
        x = rng.uniform(-5, 5, size=1)
        value = op.omega_norm(fam.grid, fam.evaluate(x))
        assert abs(value - ref) < 1e-14 * max(1.0, ref)


def test_coupling_derivative_vs_finite_difference(rng):
    fam = _line_family()
    step = 1e-5
    for _ in range(5):
        x = rng.uniform(-2, 2, size=1)
        fd = (fam.evaluate(x + step) - fam.evaluate(x - step)) / (2 * step)
        an = fam.derivative(x, 0)
        assert np.linalg.norm(fd - an) < 1e-8 * max(1.0, np.linalg.norm(an))


def _independent_cross(u, v):
    # determinant expansion, independent of np.cross
    return np.array([
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ])


def test_magnetic_coupling_cross_product_weight():
    grid = op.reciprocal_mode_grid(2.0 * np.pi, 3, 1, polarization_count=2,
                                   radial_cutoff=1.1)
    vector, magnetic = op.qed_couplings(grid, 1)
    # find the mode k = (0, 0, 1); its frame is (x-hat, y-hat)
    i = next(i for i, k in enumerate(grid.momenta) if np.allclose(k, [0, 0, 1]))
    slot = 2 * i  # lambda = 1 slot of mode i
    # k ^ eps1 = (0, 1, 0): only the a = 1 magnetic family carries this slot
    by_component = {fam.component: fam for fam in magnetic if fam.particle_index == 0}
    amp = 1.0 / np.sqrt(grid.omega[i])
    assert_allclose(by_component[1].profile[slot], -1j * amp, atol=1e-15)
    assert abs(by_component[0].profile[slot]) < 1e-15
    assert abs(by_component[2].profile[slot]) < 1e-15


def test_magnetic_profile_vs_independent_cross_product():
    grid = op.reciprocal_mode_grid(np.pi, 3, 1, polarization_count=2)
    vector, magnetic = op.qed_couplings(grid, 1)
    for i, k in enumerate(grid.momenta):
        e1, e2 = op.build_polarizations(k)
        for lam, eps in enumerate((e1, e2)):
            cross = _independent_cross(k, eps)
            slot = 2 * i + lam
            amp = 1.0 / np.sqrt(grid.omega[i])
            for a in range(3):
                fam = next(f for f in magnetic if f.component == a)
                assert abs(fam.profile[slot] - (-1j * amp * cross[a])) < 1e-13


def test_transversality_kills_divergence():
    # sum_a d_{j,a} G_{j,a} = 0 for the radiation couplings
    grid = op.reciprocal_mode_grid(np.pi, 3, 1, polarization_count=2)
    vector, _ = op.qed_couplings(grid, 1)
    total = np.zeros(grid.n_slots, dtype=complex)
    for fam in vector:
        total += fam.derivative_family().profile
    assert np.abs(total).max() < 1e-13


def test_reciprocal_grid_excludes_origin():
    grid = op.reciprocal_mode_grid(2.0 * np.pi, 1, 2)
    assert grid.n_modes == 4
    assert not any(np.all(k == 0) for k in grid.momenta)
    massive = op.reciprocal_mode_grid(2.0 * np.pi, 1, 2, photon_mass=0.5)
    assert massive.n_modes == 5


def test_inner_product_conjugate_linear_first_slot():
    grid = op.ModeGrid([[1.0]], [2.0])
    g = np.array([1.0 + 1.0j])
    h = np.array([2.0])
    assert op.inner(grid, g, h) == pytest.approx(2.0 * (1.0 - 1.0j) * 2.0)
    assert op.inner(grid, 1j * g, h) == pytest.approx(-1j * op.inner(grid, g, h))
