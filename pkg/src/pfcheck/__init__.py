"""pfcheck: numerical certification of minimally coupled field Hamiltonians
on truncated Fock spaces — commutator identities, operator-norm bounds,
relative-bound constants and coupling-constant sweeps at desk scale."""

from . import fock, linops, one_particle, particle, pauli_fierz, verify
from .config import RunConfig

__version__ = "0.1.0"

__all__ = ["one_particle", "fock", "particle", "pauli_fierz", "verify",
           "linops", "RunConfig", "__version__"]
