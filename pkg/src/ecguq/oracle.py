"""Independent validation paths for the lead-field statistics.

* forward solve per time step followed by point evaluation of the boundary trace,
* Monte-Carlo sampling of electrode positions against stored boundary traces,
* the dense tensor-product correlation solve ``Z = K^+ R K^+`` on small meshes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assembly import CorrelationMatrix, check_lead_weights
from .density import JointDensityModel, sample_positions
from .linsolve import DENSE_LIMIT, SingularSolver, SingularSolveReport, dense_pseudo_inverse
from .mesh import BoundaryPoint, MeshError, TriMesh


class OracleError(RuntimeError):
    pass


@dataclass(eq=False)
class ForwardBidomainSolution:
    """Boundary traces ``u|_Sigma`` (boundary order, shape (nb, nt)) in the zero-mean gauge."""

    mesh: TriMesh
    times: np.ndarray
    traces: np.ndarray
    reports: list[SingularSolveReport]

    def evaluate(self, segments: np.ndarray, local: np.ndarray) -> np.ndarray:
        """Linear interpolation of the traces at boundary points, shape (points, nt)."""
        nb = self.mesh.n_boundary
        seg = np.asarray(segments)
        t = np.asarray(local)[:, None]
        return (1.0 - t) * self.traces[seg] + t * self.traces[(seg + 1) % nb]


def forward_bidomain(solver: SingularSolver, mesh: TriMesh, vm_loads: np.ndarray,
                     times: np.ndarray) -> ForwardBidomainSolution:
    """Solve ``K u(t) = -V(t)`` for every time step and keep the boundary traces."""
    traces = np.empty((mesh.n_boundary, vm_loads.shape[1]))
    reports = []
    for j in range(vm_loads.shape[1]):
        u, rep = solver.solve(-vm_loads[:, j])
        traces[:, j] = u[mesh.boundary]
        reports.append(rep)
    return ForwardBidomainSolution(mesh, np.asarray(times, dtype=float), traces, reports)


def pointwise_ecg(fwd: ForwardBidomainSolution, electrodes: Sequence[BoundaryPoint], weights) -> np.ndarray:
    """``V(t) = sum_l a_l u(xi_l, t)`` with the traces interpolated along boundary segments."""
    a = check_lead_weights(weights, len(electrodes))
    out = np.zeros(fwd.traces.shape[1])
    for al, pt in zip(a, electrodes):
        if not 0 <= pt.segment < fwd.mesh.n_boundary:
            raise MeshError(f"electrode segment {pt.segment} is not on the boundary")
        out += al * fwd.evaluate(np.array([pt.segment]), np.array([pt.local]))[0]
    return out


@dataclass(eq=False)
class MonteCarloEstimate:
    mean: np.ndarray
    variance: np.ndarray
    stderr_mean: np.ndarray
    stderr_variance: np.ndarray
    n_samples: int


def _sample_signals(fwd, positions, a, lo, hi):
    v = 0.0
    for al, (seg, loc) in zip(a, positions):
        if al != 0.0:
            v = v + al * fwd.evaluate(seg[lo:hi], loc[lo:hi])
    if np.isscalar(v):
        return np.zeros((hi - lo, fwd.traces.shape[1]))
    return v


def mc_statistics(fwd: ForwardBidomainSolution, densities: JointDensityModel, weights, n_samples: int,
                  seed: int, chunk: int = 20000) -> MonteCarloEstimate:
    """Sample mean and variance of the lead over independent electrode draws.

    Each electrode draws from its own stream spawned from ``seed``.  The variance
    standard error is the delete-one jackknife, evaluated in closed form.
    """
    if n_samples < 100:
        raise OracleError("at least 100 samples required")
    if not densities.independent:
        raise OracleError("Monte-Carlo sampling supports independent electrodes only")
    a = check_lead_weights(weights, len(densities.densities))
    streams = np.random.SeedSequence(seed).spawn(len(densities.densities))
    positions = [sample_positions(d, np.random.default_rng(s), n_samples)
                 for d, s in zip(densities.densities, streams)]
    n = n_samples
    ref = _sample_signals(fwd, positions, a, 0, 1)[0]

    total = np.zeros_like(ref)
    for lo in range(0, n, chunk):
        total += (_sample_signals(fwd, positions, a, lo, min(n, lo + chunk)) - ref).sum(axis=0)
    shift = total / n
    ss = np.zeros_like(ref)
    ss4 = np.zeros_like(ref)
    for lo in range(0, n, chunk):
        d = _sample_signals(fwd, positions, a, lo, min(n, lo + chunk)) - ref - shift
        d2 = d * d
        ss += d2.sum(axis=0)
        ss4 += (d2 * d2).sum(axis=0)
    mean = ref + shift
    var = ss / (n - 1)
    # jackknife: s2_(i) - s2 = -n / ((n-1)(n-2)) * (d_i^2 - S/n)
    centred = ss4 - ss * ss / n  # sum_i (d_i^2 - S/n)^2
    coef = n / ((n - 1.0) * (n - 2.0))
    se_var = np.sqrt(np.maximum((n - 1.0) / n * coef * coef * centred, 0.0))
    se_mean = np.sqrt(var / n)
    return MonteCarloEstimate(mean, var, se_mean, se_var, n)


def full_tensor_correlation(K, R: CorrelationMatrix, vm_loads: np.ndarray) -> np.ndarray:
    """``Cor[V](t, s) = V(t)' Z V(s)`` with ``Z = K^+ R K^+`` solved densely."""
    n = K.shape[0]
    if n > DENSE_LIMIT:
        raise OracleError(f"full tensor oracle limited to {DENSE_LIMIT} vertices, mesh has {n}")
    kp = dense_pseudo_inverse(K)
    Z = kp @ R.full(n) @ kp
    Z = 0.5 * (Z + Z.T)
    cor = vm_loads.T @ (Z @ vm_loads)
    return 0.5 * (cor + cor.T)
