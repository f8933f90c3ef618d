"""ECG statistics under random electrode positions via lead fields.

Sign convention: the lead field solves ``K z = p`` with the electrode load ``p``
(positive Dirac weights).  The forward problem reads ``K u = -V(t)``, so the lead
signal is ``V(t) . u = -V(t) . z`` evaluated through ``p . u``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .assembly import (
    CorrelationMatrix,
    assemble_correlation,
    assemble_expected_load,
    assemble_point_load,
    check_lead_weights,
)
from .density import JointDensityModel
from .linsolve import SingularSolver, SingularSolveReport
from .lowrank import LowRankFactors, pivoted_cholesky
from .mesh import BoundaryPoint, TriMesh


class StatisticsError(RuntimeError):
    pass


@dataclass(frozen=True)
class LeadDefinition:
    """A lead: zero-sum weights over named electrodes with anchor angles (rad)."""

    name: str
    electrodes: tuple[str, ...]
    weights: tuple[Fraction, ...]
    angles: tuple[float, ...]

    def __post_init__(self):
        if len(self.electrodes) < 2:
            raise ValueError(f"lead {self.name}: at least two electrodes required")
        if not len(self.electrodes) == len(self.weights) == len(self.angles):
            raise ValueError(f"lead {self.name}: electrodes, weights and angles differ in length")
        if sum(self.weights, Fraction(0)) != 0:
            raise ValueError(f"lead {self.name}: weights must sum to zero exactly")

    @property
    def a(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])


def benchmark_leads() -> tuple[LeadDefinition, LeadDefinition]:
    """Leads II and V1 over the electrodes (VL, VR, VF, V1)."""
    names = ("VL", "VR", "VF", "V1")
    angles = (0.75 * np.pi, 0.25 * np.pi, 1.5 * np.pi, np.pi)
    third = Fraction(1, 3)
    lead_ii = LeadDefinition("II", names, (Fraction(-1), Fraction(0), Fraction(1), Fraction(0)), angles)
    lead_v1 = LeadDefinition("V1", names, (-third, -third, -third, Fraction(1)), angles)
    return lead_ii, lead_v1


@dataclass(eq=False)
class EcgStatistics:
    """Lead signals on a time grid; the correlation is kept in factor form.

    ``cor_factors[:, k]`` is ``V(t) . zeta_k`` so that
    ``Cor[V](t, s) = sum_k cor_factors[t, k] * cor_factors[s, k]``.
    """

    times: np.ndarray
    deterministic: np.ndarray
    mean: np.ndarray
    cor_factors: np.ndarray
    rank: int = 0
    reports: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    slack: float = 1e-10
    fields: dict | None = None  # optional nodal lead fields: z_det, z, zetas

    def correlation(self, i=None, j=None) -> np.ndarray:
        a = self.cor_factors if i is None else self.cor_factors[i]
        b = self.cor_factors if j is None else self.cor_factors[j]
        return a @ b.T

    @property
    def second_moment(self) -> np.ndarray:
        return np.einsum("tk,tk->t", self.cor_factors, self.cor_factors)

    @property
    def variance(self) -> np.ndarray:
        return self.second_moment - self.mean**2

    def check_variance(self) -> None:
        var = self.variance
        scale = max(float(np.max(self.second_moment)), float(np.max(self.mean**2)), 0.0)
        if np.min(var, initial=0.0) < -self.slack * scale:
            raise StatisticsError(f"negative variance {np.min(var):.3g} beyond numerical slack")

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.variance, 0.0))

    def band(self, z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
        return self.mean - z * self.std, self.mean + z * self.std


def lead_signal(vm_loads: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Signal ``-V(t) . z`` for loads of shape (n, nt) and lead field(s) (n,) or (n, k)."""
    return -(vm_loads.T @ z)


def compatible_factors(factors: np.ndarray, nodes: np.ndarray, n: int, rel_tol: float = 1e-6) -> np.ndarray:
    """Scatter boundary factors to full vectors after removing rounding-level constant parts.

    Late pivots are tiny, so their rounding is judged against the largest
    factor rather than against their own size.
    """
    sums = factors.sum(axis=0)
    scale = float(np.abs(factors).sum(axis=0).max(initial=0.0))
    if np.any(np.abs(sums) > rel_tol * max(scale, 1e-300)):
        raise StatisticsError("correlation factors are not compatible with the Neumann problem")
    fixed = factors - sums / factors.shape[0]
    out = np.zeros((n, factors.shape[1]))
    out[nodes] = fixed
    return out


def deterministic_ecg(solver: SingularSolver, mesh: TriMesh, lead: LeadDefinition | Sequence[float],
                      electrodes: Sequence[BoundaryPoint], vm_loads: np.ndarray):
    """Point-electrode ECG: one lead-field solve, then ``-V(t) . z`` for all times."""
    a = lead.a if isinstance(lead, LeadDefinition) else check_lead_weights(lead)
    z, report = solver.solve(assemble_point_load(mesh, electrodes, a))
    return lead_signal(vm_loads, z), z, report


def expected_ecg(solver: SingularSolver, mesh: TriMesh, lead, densities: JointDensityModel, vm_loads: np.ndarray):
    a = lead.a if isinstance(lead, LeadDefinition) else check_lead_weights(lead)
    z, report = solver.solve(assemble_expected_load(mesh, densities, a))
    return lead_signal(vm_loads, z), z, report


@dataclass(eq=False)
class CorrelationSolution:
    R: CorrelationMatrix
    factors: LowRankFactors
    zetas: np.ndarray
    reports: list[SingularSolveReport]


def correlation_lead_fields(solver: SingularSolver, mesh: TriMesh, lead, densities: JointDensityModel,
                            tol: float = 1e-10) -> CorrelationSolution:
    """Assemble R, factor it, and solve ``K zeta_k = r_k`` for every mode."""
    a = lead.a if isinstance(lead, LeadDefinition) else check_lead_weights(lead)
    R = assemble_correlation(mesh, densities, a)
    factors = pivoted_cholesky(R.matrix, tol)
    rhs = compatible_factors(factors.factors, R.nodes, mesh.n_vertices)
    zetas, reports = solver.solve_many(rhs)
    return CorrelationSolution(R, factors, zetas, reports)


def correlation_ecg(solver: SingularSolver, mesh: TriMesh, lead: LeadDefinition, electrodes: Sequence[BoundaryPoint],
                    densities: JointDensityModel, vm_loads: np.ndarray, times: np.ndarray,
                    tol: float = 1e-10, keep_fields: bool = False) -> EcgStatistics:
    """Deterministic, expected and correlated ECG of one lead."""
    timings = {}
    t0 = time.perf_counter()
    v_det, z_det, rep_det = deterministic_ecg(solver, mesh, lead, electrodes, vm_loads)
    timings["deterministic"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    mean, z, rep_mean = expected_ecg(solver, mesh, lead, densities, vm_loads)
    timings["expectation"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    cor = correlation_lead_fields(solver, mesh, lead, densities, tol)
    factors_t = lead_signal(vm_loads, cor.zetas)
    timings["correlation"] = time.perf_counter() - t0
    stats = EcgStatistics(
        times=np.asarray(times, dtype=float),
        deterministic=v_det,
        mean=mean,
        cor_factors=factors_t,
        rank=cor.factors.rank,
        reports={"deterministic": rep_det, "expectation": rep_mean, "correlation": cor.reports,
                 "cholesky": {"rank": cor.factors.rank, "trace": cor.factors.trace,
                              "residual_trace": cor.factors.residual_trace, "tol": tol}},
        timings=timings,
        fields={"z_det": z_det, "z": z, "zetas": cor.zetas} if keep_fields else None,
    )
    stats.check_variance()
    return stats


def vm_loads_from(B: sp.spmatrix, vm: np.ndarray) -> np.ndarray:
    """``V(t)`` for all times: ``B @ vm`` with vm of shape (n, nt).

    B annihilates constants, so each column is shifted by its minimum first;
    this avoids cancellation against the resting potential.  The columns of B
    sum to zero, so any remaining sum is rounding and is removed over the rows
    B touches (once the heart is fully depolarised V(t) is pure rounding noise).
    """
    vm = np.asarray(vm, dtype=float)
    loads = np.asarray(B @ (vm - vm.min(axis=0)))
    rows = np.flatnonzero(np.diff(sp.csr_matrix(B).indptr))
    loads[rows] -= loads[rows].sum(axis=0) / len(rows)
    return loads


def gauge_shift_invariance(vm_loads: np.ndarray) -> float:
    """Largest ``|1'V(t)| / |V(t)|_1``; signals are gauge invariant when this is at rounding level."""
    sums = np.abs(vm_loads.sum(axis=0))
    norms = np.abs(vm_loads).sum(axis=0)
    ratio = np.where(norms > 0, sums / np.where(norms > 0, norms, 1.0), 0.0)
    return float(ratio.max())
