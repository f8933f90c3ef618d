"""Activation times from the anisotropic eikonal equation and the transmembrane potential.

The eikonal equation ``sqrt(D grad(tau) . grad(tau)) = 1`` is solved with the
heat method: one implicit heat step from the source, normalisation of the heat
gradient in the D-metric, and a D-weighted Poisson recovery of tau.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssemblyError, ConductivityModel, assemble_operator, p1_gradients
from .linsolve import SingularSolver
from .mesh import FiberField, Region, TriMesh


class ActivationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ActivationModel:
    """Eikonal metric ``D = alpha * G_m`` per heart triangle (cm^2/ms^2, tau in ms)."""

    D: np.ndarray
    alpha: float
    source_cm: tuple[float, float]
    dt_ms: float = 4.0


@dataclass(frozen=True)
class APTemplate:
    """Action potential upstroke ``U(s) = v_rest + (v_dep - v_rest) (1 + tanh(s / eps)) / 2``."""

    v_rest_mv: float = -85.0
    v_dep_mv: float = 30.0
    eps_ms: float = 0.4

    def __post_init__(self):
        if not self.v_dep_mv > self.v_rest_mv:
            raise ValueError("depolarised potential must exceed the resting potential")
        if not self.eps_ms > 0:
            raise ValueError("upstroke width must be positive")

    def __call__(self, s):
        half = 0.5 * (self.v_dep_mv - self.v_rest_mv)
        return self.v_rest_mv + half * (1.0 + np.tanh(np.asarray(s) / self.eps_ms))


@dataclass(frozen=True, eq=False)
class ActivationMap:
    """Activation times (ms) on the heart vertices ``vertices`` (global indices)."""

    vertices: np.ndarray
    tau: np.ndarray
    source_vertex: int

    def full(self, n_vertices: int, fill: float = np.nan) -> np.ndarray:
        out = np.full(n_vertices, fill)
        out[self.vertices] = self.tau
        return out


def monodomain_conductivity(gi: np.ndarray, ge: np.ndarray) -> np.ndarray:
    """``G_m = G_i (G_i + G_e)^-1 G_e`` per triangle."""
    s = gi + ge
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    if np.any(np.abs(det) <= 1e-300):
        raise AssemblyError("singular G_i + G_e")
    inv = np.empty_like(s)
    inv[:, 0, 0] = s[:, 1, 1]
    inv[:, 1, 1] = s[:, 0, 0]
    inv[:, 0, 1] = -s[:, 0, 1]
    inv[:, 1, 0] = -s[:, 1, 0]
    inv /= det[:, None, None]
    gm = gi @ inv @ ge
    return 0.5 * (gm + gm.transpose(0, 2, 1))


def monodomain_tensor(conductivity: ConductivityModel, fibers: FiberField, cv_long_cm_per_s: float = 65.0,
                      source_cm=(-2.0, 2.0), dt_ms: float = 4.0) -> ActivationModel:
    """Eikonal metric scaled so that plane waves along the fibers travel at ``cv_long``."""
    f = fibers.vectors
    ff = f[:, :, None] * f[:, None, :]
    eye = np.eye(2)
    c = conductivity
    gi = c.sigma_i_trans * eye + (c.sigma_i_long - c.sigma_i_trans) * ff
    ge = c.sigma_e_trans * eye + (c.sigma_e_long - c.sigma_e_trans) * ff
    gm = monodomain_conductivity(gi, ge)
    gm_long = c.sigma_i_long * c.sigma_e_long / (c.sigma_i_long + c.sigma_e_long)
    cv = cv_long_cm_per_s * 1e-3  # cm/ms
    alpha = cv * cv / gm_long
    return ActivationModel(alpha * gm, float(alpha), tuple(float(v) for v in source_cm), float(dt_ms))


def heat_method(vertices: np.ndarray, triangles: np.ndarray, D: np.ndarray, sources, dt: float,
                solver: str = "direct") -> np.ndarray:
    """Eikonal arrival times on a triangle mesh with metric tensors ``D`` (one per triangle).

    ``sources`` are local vertex indices where tau vanishes.  Homogeneous Neumann
    conditions are used for the heat step.
    """
    n = len(vertices)
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    area, grads = p1_gradients(vertices, triangles)
    A = assemble_operator(vertices, triangles, D, n=n)
    lumped = np.zeros(n)
    np.add.at(lumped, triangles.ravel(), np.repeat(area / 3.0, 3))
    rhs = np.zeros(n)
    rhs[sources] = 1.0
    heat = spla.splu(sp.csc_matrix(sp.diags(lumped) + dt * A)).solve(rhs)

    gv = np.einsum("mi,mia->ma", heat[triangles], grads)
    norm = np.sqrt(np.einsum("ma,mab,mb->m", gv, D, gv))
    if np.any(norm <= 0) or not np.all(np.isfinite(norm)):
        raise ActivationError("heat solution has a vanishing gradient; decrease the mesh size or increase dt")
    Y = -gv / norm[:, None]

    div = np.zeros(n)
    flux = np.einsum("mab,mb->ma", D, Y)
    np.add.at(div, triangles.ravel(), (area[:, None] * np.einsum("ma,mia->mi", flux, grads)).ravel())
    tau, _ = SingularSolver(A, tol=1e-10, method=solver).solve(div)
    tau = tau - tau[sources].mean()
    return np.maximum(tau, 0.0)


def heart_submesh(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Heart vertices (global ids), their coordinates, and heart triangles in local numbering."""
    tri = mesh.triangles[mesh.region_triangles(Region.HEART)]
    verts = np.unique(tri)
    local = np.full(mesh.n_vertices, -1, dtype=np.int64)
    local[verts] = np.arange(len(verts))
    return verts, mesh.vertices[verts], local[tri]


def solve_eikonal_heat(mesh: TriMesh, model: ActivationModel, solver: str = "direct") -> ActivationMap:
    """Activation map of the heart region; the source snaps to the nearest heart vertex."""
    verts, xy, tri = heart_submesh(mesh)
    if len(model.D) != len(tri):
        raise ActivationError("one eikonal tensor per heart triangle required")
    src = int(np.argmin(np.hypot(*(xy - np.asarray(model.source_cm)).T)))
    tau = heat_method(xy, tri, model.D, [src], model.dt_ms, solver=solver)
    return ActivationMap(verts, tau, int(verts[src]))


def transmembrane_series(activation: ActivationMap, template: APTemplate, times: np.ndarray,
                         n_vertices: int | None = None) -> np.ndarray:
    """Nodal ``V_m(x, t) = U(t - tau(x))``, shape (vertices, times).

    With ``n_vertices`` the result is scattered to a full-length array filled
    with the resting potential off the heart.
    """
    times = np.asarray(times, dtype=float)
    vm = template(times[None, :] - activation.tau[:, None])
    if n_vertices is None:
        return vm
    out = np.full((n_vertices, len(times)), template.v_rest_mv)
    out[activation.vertices] = vm
    return out


def time_grid(t_end_ms: float = 120.0, dt_ms: float = 1.0) -> np.ndarray:
    n = int(round(t_end_ms / dt_ms))
    if n <= 0 or abs(n * dt_ms - t_end_ms) > 1e-9 * max(t_end_ms, 1.0):
        raise ValueError("t_end must be a positive multiple of dt")
    return np.linspace(0.0, t_end_ms, n + 1)
