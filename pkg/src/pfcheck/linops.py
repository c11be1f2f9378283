"""Lazy operator DAG on (spatial grid) x (spin) x (Fock) tensor products.

Vectors are complex arrays of shape (fock_dim, spin_dim, *spatial_shape); the
flat layout (C order) therefore runs spatial fastest and Fock slowest, which
is the documented export convention.  Operators are composed as sum/product
nodes over factor leaves with lazy matrix-vector application; nothing is
materialized unless to_dense() is called below the configured threshold.

Safe-sector metadata travels with every node:
  * quanta_reach  - pessimistic Fock ladder depth (sum of |grading shifts|
    along a factor chain; products add, sums take the max),
  * band_reach    - per-axis Fourier bandwidth consumed by spatial
    multiplications (None when unknown, e.g. a generic potential).
A check involving an operator must keep at least these margins free below
the Fock cutoff / the spatial Nyquist band.
"""

from __future__ import annotations

import numbers

import numpy as np
from scipy import sparse

__all__ = ["LinOp", "SumOp", "ProductOp", "IdentityOp", "FockFactorOp",
           "SpinFactorOp", "SpatialMultiplier", "FourierMultiplier"]


def _combine_band(values) -> int | None:
    total = 0
    for v in values:
        if v is None:
            return None
        total = max(total, v)
    return total


class LinOp:
    """Linear map on composite vectors of a fixed shape.

    shape = (fock_dim, spin_dim, spatial_shape tuple).
    """

    def __init__(self, shape, hermitian=False, quanta_reach=0, band_reach=0):
        self.shape = (shape[0], shape[1], tuple(shape[2]))
        self.hermitian = bool(hermitian)
        self.quanta_reach = quanta_reach
        self.band_reach = band_reach

    @property
    def dim(self) -> int:
        nf, ns, sp = self.shape
        return nf * ns * int(np.prod(sp, dtype=np.int64)) if sp else nf * ns

    @property
    def full_shape(self) -> tuple[int, ...]:
        nf, ns, sp = self.shape
        return (nf, ns) + sp

    def apply(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self) -> "LinOp":
        raise NotImplementedError

    # -- flat-vector interface (iterative solvers) ------------------------
    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.apply(np.asarray(x, dtype=complex).reshape(self.full_shape)).ravel()

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        return self.adjoint().matvec(x)

    # -- algebra -----------------------------------------------------------
    def __add__(self, other: "LinOp") -> "LinOp":
        return SumOp([(1.0, self), (1.0, other)])

    def __sub__(self, other: "LinOp") -> "LinOp":
        return SumOp([(1.0, self), (-1.0, other)])

    def __mul__(self, scalar):
        if not isinstance(scalar, numbers.Number):
            return NotImplemented
        return SumOp([(complex(scalar), self)])

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other: "LinOp") -> "LinOp":
        return ProductOp([self, other])

    # -- diagnostics ---------------------------------------------------------
    def adjoint_defect(self, rng, trials: int = 5) -> float:
        """max |<u, Op v> - <Op u, v>| / (||u|| ||v||) over random pairs."""
        adj = self.adjoint()
        worst = 0.0
        for _ in range(trials):
            u = rng.standard_normal(self.full_shape) + 1j * rng.standard_normal(self.full_shape)
            v = rng.standard_normal(self.full_shape) + 1j * rng.standard_normal(self.full_shape)
            lhs = np.vdot(u, self.apply(v))
            rhs = np.vdot(adj.apply(u), v)
            worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v)))
        return worst

    def to_dense(self, limit: int = 4096) -> np.ndarray:
        if self.dim > limit:
            raise ValueError(f"dimension {self.dim} exceeds dense threshold {limit}")
        out = np.empty((self.dim, self.dim), dtype=complex)
        e = np.zeros(self.dim, dtype=complex)
        for j in range(self.dim):
            e[j] = 1.0
            out[:, j] = self.matvec(e)
            e[j] = 0.0
        return out


class IdentityOp(LinOp):
    def __init__(self, shape):
        super().__init__(shape, hermitian=True)

    def apply(self, v):
        return v.copy()

    def adjoint(self):
        return self


class FockFactorOp(LinOp):
    """Sparse matrix acting on the Fock index (axis 0)."""

    def __init__(self, shape, matrix: sparse.spmatrix, quanta_reach: int,
                 hermitian: bool = False):
        super().__init__(shape, hermitian=hermitian, quanta_reach=quanta_reach,
                         band_reach=0)
        if matrix.shape != (shape[0], shape[0]):
            raise ValueError("Fock factor dimension mismatch")
        self.matrix = matrix.tocsr()

    def apply(self, v):
        nf = self.shape[0]
        return (self.matrix @ v.reshape(nf, -1)).reshape(self.full_shape)

    def adjoint(self):
        if self.hermitian:
            return self
        return FockFactorOp(self.shape, self.matrix.conj().T.tocsr(),
                            self.quanta_reach, False)


class SpinFactorOp(LinOp):
    """Dense matrix acting on the spin index (axis 1)."""

    def __init__(self, shape, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=complex)
        herm = bool(np.allclose(matrix, matrix.conj().T, atol=1e-15))
        super().__init__(shape, hermitian=herm)
        if matrix.shape != (shape[1], shape[1]):
            raise ValueError("spin factor dimension mismatch")
        self.matrix = matrix

    def apply(self, v):
        out = np.tensordot(self.matrix, v, axes=([1], [1]))  # (ns, nf, *sp)
        return np.moveaxis(out, 0, 1)

    def adjoint(self):
        if self.hermitian:
            return self
        return SpinFactorOp(self.shape, self.matrix.conj().T)


class SpatialMultiplier(LinOp):
    """Pointwise multiplication by a grid function (diagonal in position)."""

    def __init__(self, shape, values: np.ndarray, band_reach=None):
        values = np.asarray(values)
        herm = bool(np.isrealobj(values)) or bool(np.all(values.imag == 0.0))
        if band_reach is None and (values == values.flat[0]).all():
            band_reach = 0  # constant multiplier costs no bandwidth
        super().__init__(shape, hermitian=herm, band_reach=band_reach)
        if values.shape != self.shape[2]:
            raise ValueError("multiplier values must match the spatial shape")
        self.values = values.astype(complex)

    def apply(self, v):
        return v * self.values[None, None]

    def adjoint(self):
        if self.hermitian:
            return self
        return SpatialMultiplier(self.shape, self.values.conj(), self.band_reach)


class FourierMultiplier(LinOp):
    """Multiplication by a symbol in the spatial Fourier domain.

    Realizes functions of the momentum operators (p_j, p^2, band masks);
    symbols are arrays over the FFT-ordered wavenumber grid.
    """

    def __init__(self, shape, symbol: np.ndarray):
        symbol = np.asarray(symbol)
        herm = bool(np.isrealobj(symbol)) or bool(np.all(symbol.imag == 0.0))
        super().__init__(shape, hermitian=herm)
        if symbol.shape != self.shape[2]:
            raise ValueError("symbol must match the spatial shape")
        self.symbol = symbol.astype(complex)
        self._axes = tuple(range(2, 2 + len(self.shape[2])))

    def apply(self, v):
        w = np.fft.fftn(v, axes=self._axes, norm="ortho")
        w *= self.symbol[None, None]
        return np.fft.ifftn(w, axes=self._axes, norm="ortho")

    def adjoint(self):
        if self.hermitian:
            return self
        return FourierMultiplier(self.shape, self.symbol.conj())


class SumOp(LinOp):
    """Linear combination sum_i coeff_i op_i (flattens nested sums)."""

    def __init__(self, terms, hermitian=None):
        flat = []
        for coeff, op in terms:
            coeff = complex(coeff)
            if isinstance(op, SumOp):
                flat.extend((coeff * c, o) for c, o in op.terms)
            else:
                flat.append((coeff, op))
        if not flat:
            raise ValueError("empty sum")
        shape = flat[0][1].shape
        if hermitian is None:
            hermitian = all(o.hermitian and c.imag == 0.0 for c, o in flat)
        super().__init__(
            shape,
            hermitian=hermitian,
            quanta_reach=max(o.quanta_reach for _, o in flat),
            band_reach=_combine_band(o.band_reach for _, o in flat),
        )
        self.terms = flat

    def apply(self, v):
        out = np.zeros(self.full_shape, dtype=complex)
        for coeff, op in self.terms:
            out += coeff * op.apply(v)
        return out

    def adjoint(self):
        if self.hermitian:
            return self
        return SumOp([(np.conj(c), o.adjoint()) for c, o in self.terms])


class ProductOp(LinOp):
    """Composition op_0 op_1 ... op_k (applied right to left)."""

    def __init__(self, ops, hermitian=False):
        ops = list(ops)
        if not ops:
            raise ValueError("empty product")
        band = 0 if all(o.band_reach is not None for o in ops) else None
        if band == 0:
            band = sum(o.band_reach for o in ops)
        super().__init__(
            ops[0].shape,
            hermitian=hermitian or (len(ops) == 1 and ops[0].hermitian),
            quanta_reach=sum(o.quanta_reach for o in ops),
            band_reach=band,
        )
        self.ops = ops

    def apply(self, v):
        for op in reversed(self.ops):
            v = op.apply(v)
        return v

    def adjoint(self):
        if self.hermitian:
            return self
        return ProductOp([o.adjoint() for o in reversed(self.ops)])


def commutator(x: LinOp, y: LinOp) -> LinOp:
    return SumOp([(1.0, ProductOp([x, y])), (-1.0, ProductOp([y, x]))])
