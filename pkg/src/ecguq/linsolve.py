"""Solvers for pure-Neumann systems ``K x = b`` whose kernel is the constants.

Solutions are returned in the zero-mean gauge over all vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 500


class SolverError(RuntimeError):
    pass


class IncompatibleRHSError(SolverError, ValueError):
    pass


class ConvergenceError(SolverError):
    pass


@dataclass
class SingularSolveReport:
    iterations: int
    residual: float
    compatibility_defect: float
    method: str
    gauge: str = "mean-zero"


def compatibility_defect(b: np.ndarray) -> float:
    norm1 = np.abs(b).sum()
    return 0.0 if norm1 == 0 else float(abs(b.sum()) / norm1)


def _project(b: np.ndarray) -> np.ndarray:
    return b - b.mean(axis=0)


def _check_rhs(b: np.ndarray, compat_tol: float) -> float:
    d = compatibility_defect(b)
    if d > compat_tol:
        raise IncompatibleRHSError(f"right-hand side violates compatibility: |1'b|/|b|_1 = {d:.3g}")
    return d


def pcg_mean_zero(K: sp.spmatrix, b: np.ndarray, tol: float = 1e-10, maxiter: int | None = None):
    """Jacobi-preconditioned CG with search directions kept in the zero-mean subspace.

    ``b`` must already be orthogonal to the constants.  Returns ``(x, iterations, rel_residual)``.
    """
    n = K.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0:
        return x, 0, 0.0
    dinv = 1.0 / K.diagonal()
    r = b.copy()
    z = _project(dinv * r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        kp = K @ p
        alpha = rz / (p @ kp)
        x += alpha * p
        r -= alpha * kp
        if np.linalg.norm(r) <= tol * bnorm:
            # guard against recurrence drift with the true residual
            r = b - K @ x
            res = np.linalg.norm(r) / bnorm
            if res <= tol:
                return _project(x), it, float(res)
        z = _project(dinv * r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - K @ x) / bnorm
    raise ConvergenceError(f"CG did not converge in {maxiter} iterations (residual {res:.3g})")


class SingularSolver:
    """Reusable solver for one singular stiffness matrix and many right-hand sides.

    ``method`` is ``"cg"`` (preconditioned CG), ``"direct"`` (sparse LU of the
    matrix with vertex 0 grounded, then re-gauged) or ``"dense"`` (pseudo-inverse,
    small meshes only).
    """

    def __init__(self, K: sp.spmatrix, tol: float = 1e-10, method: str = "cg",
                 maxiter: int | None = None, compat_tol: float = 1e-8):
        if method not in ("cg", "direct", "dense"):
            raise ValueError(f"unknown solver method {method!r}")
        self.K = sp.csr_matrix(K)
        self.n = self.K.shape[0]
        self.tol = tol
        self.method = method
        self.maxiter = maxiter
        self.compat_tol = compat_tol
        self._lu = None
        self._pinv = None
        if method == "direct":
            kp = self.K.tolil()
            kp[0, :] = 0.0
            kp[:, 0] = 0.0
            kp[0, 0] = 1.0
            self._lu = spla.splu(sp.csc_matrix(kp), permc_spec="MMD_AT_PLUS_A")
        elif method == "dense":
            self._pinv = dense_pseudo_inverse(self.K)

    def solve(self, b: np.ndarray) -> tuple[np.ndarray, SingularSolveReport]:
        b = np.asarray(b, dtype=float)
        defect = _check_rhs(b, self.compat_tol)
        bp = _project(b)
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros(self.n), SingularSolveReport(0, 0.0, defect, self.method)
        if self.method == "cg":
            x, it, _ = pcg_mean_zero(self.K, bp, self.tol, self.maxiter)
        elif self.method == "direct":
            rhs = bp.copy()
            rhs[0] = 0.0
            x = _project(self._lu.solve(rhs))
            it = 1
        else:
            x = self._pinv @ bp
            it = 1
        res = float(np.linalg.norm(self.K @ x - bp) / bnorm)
        if res > self.tol:
            raise ConvergenceError(f"{self.method} solve residual {res:.3g} exceeds {self.tol:.3g}")
        return x, SingularSolveReport(it, res, defect, self.method)

    def solve_many(self, B: np.ndarray) -> tuple[np.ndarray, list[SingularSolveReport]]:
        """Solve for each column of ``B``."""
        B = np.asarray(B, dtype=float)
        out = np.empty_like(B)
        reports = []
        for j in range(B.shape[1]):
            out[:, j], rep = self.solve(B[:, j])
            reports.append(rep)
        return out, reports


def solve_singular(K: sp.spmatrix, b: np.ndarray, tol: float = 1e-10, method: str = "cg",
                   maxiter: int | None = None) -> tuple[np.ndarray, SingularSolveReport]:
    """Zero-mean solution of the compatible singular system ``K x = b``."""
    return SingularSolver(K, tol=tol, method=method, maxiter=maxiter).solve(b)


def dense_pseudo_inverse(K) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix with a one-dimensional kernel (small n only)."""
    n = K.shape[0]
    if n > DENSE_LIMIT:
        raise SolverError(f"dense pseudo-inverse limited to {DENSE_LIMIT} unknowns, got {n}")
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
    lam, vec = np.linalg.eigh(Kd)
    keep = np.ones(n, dtype=bool)
    keep[np.argmin(np.abs(lam))] = False
    return (vec[:, keep] / lam[keep]) @ vec[:, keep].T
