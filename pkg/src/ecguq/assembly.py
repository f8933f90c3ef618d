"""Galerkin assembly for P1 elements: stiffness, boundary loads, boundary correlation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .density import JointDensityModel
from .mesh import BoundaryPoint, FiberField, Region, TriMesh, barycentric_weights


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class ConductivityModel:
    """Bidomain and torso conductivities in mS/cm (2-D units of the benchmark)."""

    sigma_i_long: float = 3.0
    sigma_i_trans: float = 0.3
    sigma_e_long: float = 3.0
    sigma_e_trans: float = 1.2
    sigma_torso: float = 2.0
    sigma_blood: float = 6.0

    def validate(self) -> None:
        vals = (self.sigma_i_long, self.sigma_i_trans, self.sigma_e_long,
                self.sigma_e_trans, self.sigma_torso, self.sigma_blood)
        if min(vals) <= 0:
            raise AssemblyError("conductivities must be positive")

    def intracellular(self, mesh: TriMesh, fibers: FiberField) -> np.ndarray:
        """Per-triangle G_i, zero outside the heart."""
        return _transverse(mesh, fibers, self.sigma_i_long, self.sigma_i_trans)

    def extracellular(self, mesh: TriMesh, fibers: FiberField) -> np.ndarray:
        return _transverse(mesh, fibers, self.sigma_e_long, self.sigma_e_trans)

    def bulk(self, mesh: TriMesh, fibers: FiberField) -> np.ndarray:
        """Per-triangle G: G_i + G_e in the heart, isotropic torso/blood values elsewhere."""
        g = self.intracellular(mesh, fibers) + self.extracellular(mesh, fibers)
        eye = np.eye(2)
        g[mesh.tags == Region.TORSO] = self.sigma_torso * eye
        g[mesh.tags == Region.BLOOD] = self.sigma_blood * eye
        return g


def _transverse(mesh: TriMesh, fibers: FiberField, long: float, trans: float) -> np.ndarray:
    out = np.zeros((len(mesh.triangles), 2, 2))
    f = fibers.vectors
    out[fibers.triangles] = trans * np.eye(2) + (long - trans) * f[:, :, None] * f[:, None, :]
    return out


def p1_gradients(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Areas (m,) and constant basis gradients (m, 3, 2) of P1 triangles."""
    p = vertices[triangles]
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grads = np.empty((len(triangles), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = (y[:, j] - y[:, k]) / area2
        grads[:, i, 1] = (x[:, k] - x[:, j]) / area2
    return 0.5 * area2, grads


def element_matrices(vertices: np.ndarray, triangles: np.ndarray, tensors: np.ndarray) -> np.ndarray:
    """``area * grad(phi_i) . G grad(phi_j)`` per triangle, with exactly zero row sums."""
    area, grads = p1_gradients(vertices, triangles)
    ke = area[:, None, None] * np.einsum("mia,mab,mjb->mij", grads, tensors, grads)
    ke = 0.5 * (ke + ke.transpose(0, 2, 1))
    off = ke.copy()
    idx = np.arange(3)
    off[:, idx, idx] = 0.0
    ke[:, idx, idx] = -off.sum(axis=2)
    return ke


def assemble_operator(vertices: np.ndarray, triangles: np.ndarray, tensors: np.ndarray,
                      n: int | None = None) -> sp.csr_matrix:
    """Sparse P1 diffusion operator ``int G grad(phi_j) . grad(phi_i)``."""
    n = len(vertices) if n is None else n
    ke = element_matrices(vertices, triangles, tensors)
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    return sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))


def _check_spd(tensors: np.ndarray, which: np.ndarray | None = None) -> None:
    t = tensors if which is None else tensors[which]
    if len(t) == 0:
        return
    a, b, c = t[:, 0, 0], t[:, 0, 1], t[:, 1, 1]
    if not np.allclose(t[:, 0, 1], t[:, 1, 0]):
        raise AssemblyError("element tensor is not symmetric")
    if np.any(a <= 0) or np.any(a * c - b * b <= 0):
        raise AssemblyError("element tensor is not positive definite")


def assemble_stiffness(mesh: TriMesh, fibers: FiberField, conductivity: ConductivityModel) -> sp.csr_matrix:
    """Global stiffness K of the bulk conductivity G."""
    g = conductivity.bulk(mesh, fibers)
    _check_spd(g)
    return assemble_operator(mesh.vertices, mesh.triangles, g)


def vm_load_operator(mesh: TriMesh, fibers: FiberField, conductivity: ConductivityModel) -> sp.csr_matrix:
    """Matrix B with ``B @ vm = [int_H G_i grad(V_m) . grad(phi_j)]_j``.

    ``vm`` is a full-length nodal vector (or an (n, nt) array); values off the
    heart are ignored because only heart triangles contribute.
    """
    heart = mesh.region_triangles(Region.HEART)
    gi = conductivity.intracellular(mesh, fibers)[heart]
    _check_spd(gi)
    return assemble_operator(mesh.vertices, mesh.triangles[heart], gi, n=mesh.n_vertices)


def assemble_vm_load(mesh: TriMesh, fibers: FiberField, conductivity: ConductivityModel,
                     vm: np.ndarray) -> np.ndarray:
    return vm_load_operator(mesh, fibers, conductivity) @ vm


def check_lead_weights(weights: Sequence[float], n_electrodes: int | None = None) -> np.ndarray:
    a = np.asarray([float(w) for w in weights])
    if n_electrodes is not None and len(a) != n_electrodes:
        raise AssemblyError(f"{len(a)} lead weights for {n_electrodes} electrodes")
    if len(a) < 2:
        raise AssemblyError("a lead needs at least two electrodes")
    if abs(a.sum()) > 1e-12 * np.abs(a).sum():
        raise AssemblyError(f"lead weights must sum to zero, got {a.sum():.3g}")
    return a


def scatter_boundary(mesh: TriMesh, values: np.ndarray) -> np.ndarray:
    out = np.zeros(mesh.n_vertices)
    out[mesh.boundary] = values
    return out


def assemble_expected_load(mesh: TriMesh, densities: JointDensityModel, weights) -> np.ndarray:
    """Full-length ``g_k = int sum_l a_l rho_l phi_k``."""
    a = check_lead_weights(weights, len(densities.densities))
    gb = np.zeros(mesh.n_boundary)
    for al, rho in zip(a, densities.densities):
        if al != 0.0:
            gb += al * rho.load()
    return scatter_boundary(mesh, gb)


def assemble_point_load(mesh: TriMesh, electrodes: Sequence[BoundaryPoint], weights) -> np.ndarray:
    """Full-length load of ``sum_l a_l delta(xi_l)``, split barycentrically on boundary segments."""
    a = check_lead_weights(weights, len(electrodes))
    out = np.zeros(mesh.n_vertices)
    for al, pt in zip(a, electrodes):
        if not 0 <= pt.segment < mesh.n_boundary:
            raise AssemblyError(f"electrode segment {pt.segment} is not on the boundary")
        idx, w = barycentric_weights(mesh, pt)
        np.add.at(out, idx, al * w)
    return out


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Dense boundary-node correlation matrix; ``nodes`` maps rows to global vertex indices."""

    matrix: np.ndarray
    nodes: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def full(self, n: int) -> np.ndarray:
        out = np.zeros((n, n))
        out[np.ix_(self.nodes, self.nodes)] = self.matrix
        return out


def assemble_correlation(mesh: TriMesh, densities: JointDensityModel, weights) -> CorrelationMatrix:
    """``R = sum_l a_l^2 M[rho_l] + sum_{l != m} a_l a_m P_lm`` on the boundary nodes.

    ``M[rho]`` is the consistent rho-weighted boundary mass matrix and ``P_lm``
    the Galerkin projection of the pair marginal (``g_l g_m^T`` if independent).
    """
    a = check_lead_weights(weights, len(densities.densities))
    nb = mesh.n_boundary
    r = np.zeros((nb, nb))
    active = [i for i in range(len(a)) if a[i] != 0.0]
    for i in active:
        r += a[i] ** 2 * densities.densities[i].mass()
    for i in active:
        for j in active:
            if i != j:
                r += a[i] * a[j] * densities.pair_load(i, j)
    r = 0.5 * (r + r.T)
    return CorrelationMatrix(r, np.array(mesh.boundary))
