from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LowRankError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LowRankFactors:
    """Truncated pivoted Cholesky factors, ``R ~ factors @ factors.T``.

    ``factors`` has one column per mode, in pivot order.
    """

    factors: np.ndarray
    pivots: np.ndarray
    tol: float
    trace: float
    residual_trace: float

    @property
    def rank(self) -> int:
        return self.factors.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.factors @ self.factors.T


def pivoted_cholesky(R: np.ndarray, tol: float = 1e-10, max_rank: int | None = None) -> LowRankFactors:
    """Greedy diagonally pivoted Cholesky of a symmetric PSD matrix.

    Stops once the trace of the Schur complement drops to ``tol * trace(R)``.
    Residual diagonals that go negative through rounding are clamped to zero.
    Ties are broken towards the lowest index.
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n):
        raise LowRankError("correlation matrix must be square")
    diag = np.array(np.diag(R))
    trace = float(diag.sum())
    if not trace > 0:
        raise LowRankError(f"trace of the correlation matrix must be positive, got {trace:.3g}")
    max_rank = n if max_rank is None else min(max_rank, n)
    cols = np.zeros((n, max_rank))
    pivots = []
    np.maximum(diag, 0.0, out=diag)
    err = float(diag.sum())
    while err > tol * trace and len(pivots) < max_rank:
        k = len(pivots)
        p = int(np.argmax(diag))  # first maximum: lowest index on ties
        d = diag[p]
        if d <= 0:
            break
        col = R[:, p] - cols[:, :k] @ cols[p, :k]
        col /= np.sqrt(d)
        col[pivots] = 0.0
        cols[:, k] = col
        pivots.append(p)
        diag -= col * col
        diag[pivots] = 0.0
        np.maximum(diag, 0.0, out=diag)
        err = float(diag.sum())
    k = len(pivots)
    return LowRankFactors(cols[:, :k].copy(), np.asarray(pivots, dtype=np.int64), tol, trace, err)
