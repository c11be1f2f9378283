"""Matrix-free iterative estimators shared by the verification engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PowerResult", "power_norm"]


@dataclass
class PowerResult:
    value: float
    iterations: int
    residual: float
    converged: bool
    certificate: np.ndarray


def power_norm(apply_op, apply_adjoint, dim: int, tol: float = 1e-8,
               max_iter: int = 5000, rng=None, block: int = 4) -> PowerResult:
    """Largest singular value via block power iteration on B = Op* Op.

    Simultaneous iteration with a small orthonormal block and Rayleigh-Ritz
    extraction; a block larger than one keeps the convergence rate tied to
    the gap below the top cluster, which matters here because field-operator
    compressions routinely carry near-degenerate +- singular pairs.

    The top Ritz pair (lam, x) carries the residual certificate
    r = ||B x - lam x||: for Hermitian B, lam_max(B) lies within r of lam, so
    stopping at r <= tol * lam certifies the relative accuracy of lam (and
    half that for the singular value).  Deterministic for a seeded rng.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    k = max(1, min(block, dim))
    v = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    v, _ = np.linalg.qr(v)
    lam = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = np.column_stack([apply_adjoint(apply_op(v[:, j])) for j in range(k)])
        h = v.conj().T @ w
        h = 0.5 * (h + h.conj().T)
        evals, rot = np.linalg.eigh(h)
        lam = float(evals[-1])
        x = v @ rot[:, -1]
        bx = w @ rot[:, -1]
        residual = float(np.linalg.norm(bx - lam * x))
        if lam <= 1e-300:
            return PowerResult(0.0, it, residual, True, x)
        if residual <= tol * lam:
            return PowerResult(float(np.sqrt(lam)), it, residual, True, x)
        v, _ = np.linalg.qr(w)
    return PowerResult(float(np.sqrt(max(lam, 0.0))), max_iter, residual, False, x)
