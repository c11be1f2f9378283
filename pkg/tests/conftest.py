import numpy as np
import pytest

from pfcheck import fock as fk
from pfcheck import one_particle as op
from pfcheck import pauli_fierz as pf
from pfcheck.particle import SpatialGrid

DESK_LENGTH = 2.0 * np.pi


def desk_setup(points=16, n_particles=1, quanta_cutoff=3, max_index=1,
               rho=None):
    """1-d desk model: reciprocal modes, line couplings, composite space."""
    grid = op.reciprocal_mode_grid(DESK_LENGTH, 1, max_index,
                                   photon_mass=0.0, polarization_count=1)
    families = op.line_couplings(grid, n_particles, rho)
    basis = fk.FockBasis(grid, quanta_cutoff)
    spatial = SpatialGrid(n_particles, points, DESK_LENGTH)
    space = pf.CompositeSpace(spatial, basis, n_particles=n_particles)
    return space, families


def corollary_setup(points=4, quanta_cutoff=2, length=np.pi, spin=True):
    """3-d radiation model with spin: axis modes, vector + magnetic couplings."""
    base = 2.0 * np.pi / length
    grid = op.reciprocal_mode_grid(length, 3, 1, photon_mass=0.0,
                                   polarization_count=2,
                                   radial_cutoff=1.1 * base)
    vector, magnetic = op.qed_couplings(grid, 1)
    basis = fk.FockBasis(grid, quanta_cutoff)
    spatial = SpatialGrid(3, points, length)
    space = pf.CompositeSpace(spatial, basis, n_particles=1, spin=spin)
    return space, vector, magnetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
