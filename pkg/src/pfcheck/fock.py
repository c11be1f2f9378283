"""Truncated symmetric Fock space in the occupation-number basis.

Basis states are occupation vectors (n_1, ..., n_S) over the flattened
(mode, polarization) slots with total quanta <= quanta_cutoff, enumerated in
graded lexicographic order (by total quanta, then lexicographically).  The
dimension is binomial(S + N_max, N_max).

Quadrature weights are folded into the matrix elements once, at assembly:
the stored matrices are operators with respect to the plain Euclidean inner
product on coefficient vectors.  Creation composed with the projection back
into the cutoff space realizes the truncation; identities involving raising
operators therefore hold exactly only below the top sectors, and every check
carries an explicit safe-sector projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy import sparse

from .one_particle import ModeGrid

__all__ = [
    "FockBasis",
    "FockOperator",
    "creation",
    "annihilation",
    "field",
    "second_quantization_diagonal",
    "field_energy",
    "number_operator",
    "sector_projection",
    "write_triplets",
]


def _occupations(slots: int, total: int):
    """Occupation vectors with exactly `total` quanta, lexicographic order."""
    if slots == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _occupations(slots - 1, total - first):
            yield (first,) + rest


class FockBasis:
    """Occupation-number basis over a ModeGrid with a total-quanta cutoff."""

    def __init__(self, grid: ModeGrid, quanta_cutoff: int):
        if quanta_cutoff < 0:
            raise ValueError("quanta_cutoff must be >= 0")
        self.grid = grid
        self.quanta_cutoff = quanta_cutoff
        slots = grid.n_slots
        states = []
        for total in range(quanta_cutoff + 1):
            states.extend(_occupations(slots, total))
        self.states = np.asarray(states, dtype=np.int64)
        self.index = {tuple(s): i for i, s in enumerate(states)}
        self.totals = self.states.sum(axis=1)
        assert self.dim == comb(slots + quanta_cutoff, quanta_cutoff)
        # cached elementary ladder matrices, one per slot
        self._raising: dict[int, sparse.csr_matrix] = {}

    @property
    def n_slots(self) -> int:
        return self.grid.n_slots

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def basis_vector(self, occupation) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index[tuple(occupation)]] = 1.0
        return v

    def field_energies(self) -> np.ndarray:
        """Diagonal of H_f: sum_s n_s omega_s per basis state."""
        return self.states @ self.grid.slot_omega

    def elementary_raising(self, slot: int) -> sparse.csr_matrix:
        """Bare raising matrix for one slot: |n + e_s> <- sqrt(n_s + 1) |n>.

        No quadrature weight or amplitude; states at the cutoff map to zero.
        """
        if slot not in self._raising:
            rows, cols, vals = [], [], []
            for i, n in enumerate(self.states):
                if self.totals[i] >= self.quanta_cutoff:
                    continue
                target = n.copy()
                target[slot] += 1
                rows.append(self.index[tuple(target)])
                cols.append(i)
                vals.append(np.sqrt(n[slot] + 1.0))
            mat = sparse.csr_matrix(
                (np.asarray(vals, dtype=complex), (rows, cols)),
                shape=(self.dim, self.dim),
            )
            self._raising[slot] = mat
        return self._raising[slot]


@dataclass
class FockOperator:
    """Sparse linear map on a FockBasis with safe-sector metadata.

    quanta_reach is the pessimistic ladder depth (sum of |grading shifts|
    along any factor chain); a check involving this operator must keep a
    safe margin of at least quanta_reach below the cutoff.
    """

    matrix: sparse.csr_matrix
    basis: FockBasis
    quanta_reach: int = 0
    hermitian: bool = False

    def __post_init__(self):
        if self.matrix.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("matrix dimension does not match basis dimension")

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    @property
    def H(self) -> "FockOperator":
        return FockOperator(
            self.matrix.conj().T.tocsr(), self.basis, self.quanta_reach, self.hermitian
        )

    def __add__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(
            (self.matrix + other.matrix).tocsr(),
            self.basis,
            max(self.quanta_reach, other.quanta_reach),
            self.hermitian and other.hermitian,
        )

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return self + (-1.0) * other

    def __rmul__(self, scalar: complex) -> "FockOperator":
        herm = self.hermitian and complex(scalar).imag == 0.0
        return FockOperator(
            (scalar * self.matrix).tocsr(), self.basis, self.quanta_reach, herm
        )

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(
            (self.matrix @ other.matrix).tocsr(),
            self.basis,
            self.quanta_reach + other.quanta_reach,
            False,
        )

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(np.abs(d.toarray()).max()) if d.nnz else 0.0


def creation(basis: FockBasis, h: np.ndarray) -> FockOperator:
    """a*(h): element <n + e_s| a*(h) |n> = sqrt(w_s) h_s sqrt(n_s + 1).

    The weights make the stored matrix reproduce the weighted-inner-product
    ladder algebra on plain coefficient vectors; states at the cutoff map to
    zero (truncation projection).
    """
    h = np.asarray(h, dtype=complex).ravel()
    if h.shape != (basis.n_slots,):
        raise ValueError(f"amplitude vector must have length {basis.n_slots}")
    amp = np.sqrt(basis.grid.slot_weight) * h
    rows, cols, vals = [], [], []
    for i, n in enumerate(basis.states):
        if basis.totals[i] >= basis.quanta_cutoff:
            continue
        for s in range(basis.n_slots):
            v = amp[s] * np.sqrt(n[s] + 1.0)
            if abs(v) < 1e-300:
                continue
            target = n.copy()
            target[s] += 1
            rows.append(basis.index[tuple(target)])
            cols.append(i)
            vals.append(v)
    mat = sparse.csr_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim)
    )
    return FockOperator(mat, basis, quanta_reach=1)


def annihilation(basis: FockBasis, h: np.ndarray) -> FockOperator:
    """a(h), the exact conjugate transpose of creation(h); kills the vacuum."""
    return creation(basis, h).H


def field(basis: FockBasis, h: np.ndarray) -> FockOperator:
    """phi(h) = (a(h) + a*(h)) / sqrt(2); Hermitian, grading +-1."""
    up = creation(basis, h)
    mat = (up.matrix + up.matrix.conj().T) / np.sqrt(2.0)
    return FockOperator(mat.tocsr(), basis, quanta_reach=1, hermitian=True)


def second_quantization_diagonal(basis: FockBasis, mode_values) -> FockOperator:
    """dGamma of a diagonal one-particle operator: entry sum_s n_s value_s."""
    values = np.asarray(mode_values, dtype=float).ravel()
    if values.shape != (basis.n_slots,):
        raise ValueError("need one value per slot")
    if not np.all(np.isfinite(values)):
        raise ValueError("mode values must be finite")
    diag = basis.states @ values
    return FockOperator(
        sparse.diags(diag.astype(complex)).tocsr(), basis, quanta_reach=0, hermitian=True
    )


def field_energy(basis: FockBasis) -> FockOperator:
    """H_f = dGamma(M_omega)."""
    return second_quantization_diagonal(basis, basis.grid.slot_omega)


def number_operator(basis: FockBasis) -> FockOperator:
    """N = dGamma(1)."""
    return second_quantization_diagonal(basis, np.ones(basis.n_slots))


def sector_projection(basis: FockBasis, max_total: int) -> FockOperator:
    """Orthogonal projection onto total quanta <= max_total."""
    diag = (basis.totals <= max_total).astype(complex)
    return FockOperator(sparse.diags(diag).tocsr(), basis, 0, hermitian=True)


def write_triplets(op: FockOperator, path) -> None:
    """Export as text triplets: one `row col re im` line per stored entry."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write("# row col re im\n")
        for idx in order:
            v = coo.data[idx]
            fh.write(f"{coo.row[idx]} {coo.col[idx]} "
                     f"{float(v.real)!r} {float(v.imag)!r}\n")
