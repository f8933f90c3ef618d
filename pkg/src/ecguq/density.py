"""Electrode position densities on the boundary curve.

Densities are piecewise linear along arclength, stored by their nodal values at
the boundary vertices (in boundary order).  Every boundary integral in the
package goes through the two-point Gauss rule of this module, which is exact for
the cubic integrands ``rho * phi_p * phi_q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import brentq

from .mesh import BoundaryPoint, TriMesh, _make_point

KINDS = ("uniform", "gaussian", "dirac")

_GAUSS_X = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GAUSS_W = np.array([0.5, 0.5])


class DensityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# boundary quadrature


def _segment_nodes(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    nb = mesh.n_boundary
    left = np.arange(nb)
    return left, (left + 1) % nb


def boundary_integral(mesh: TriMesh, values: np.ndarray) -> float:
    """Integral of a nodal P1 boundary function."""
    return float(boundary_load(mesh, values).sum())


def boundary_load(mesh: TriMesh, values: np.ndarray) -> np.ndarray:
    """Boundary-indexed vector ``int rho * phi_k`` for a P1 boundary function ``rho``."""
    left, right = _segment_nodes(mesh)
    h = mesh.segment_lengths
    out = np.zeros(mesh.n_boundary)
    for x, w in zip(_GAUSS_X, _GAUSS_W):
        rho = (1 - x) * values[left] + x * values[right]
        np.add.at(out, left, w * h * rho * (1 - x))
        np.add.at(out, right, w * h * rho * x)
    return out


def weighted_boundary_mass(mesh: TriMesh, values: np.ndarray | None = None) -> np.ndarray:
    """Dense boundary matrix ``int rho * phi_p * phi_q``; ``rho = 1`` when ``values`` is None."""
    nb = mesh.n_boundary
    left, right = _segment_nodes(mesh)
    h = mesh.segment_lengths
    vals = np.ones(nb) if values is None else values
    out = np.zeros((nb, nb))
    for x, w in zip(_GAUSS_X, _GAUSS_W):
        rho = w * h * ((1 - x) * vals[left] + x * vals[right])
        np.add.at(out, (left, left), rho * (1 - x) ** 2)
        np.add.at(out, (right, right), rho * x**2)
        np.add.at(out, (left, right), rho * x * (1 - x))
        np.add.at(out, (right, left), rho * x * (1 - x))
    return out


def _wrapped(s: np.ndarray, centre: float, length: float) -> np.ndarray:
    return (s - centre + 0.5 * length) % length - 0.5 * length


def arclength_offsets(mesh: TriMesh, centre_s: float) -> np.ndarray:
    """Signed geodesic offsets of the boundary vertices from arclength ``centre_s``."""
    return _wrapped(mesh.arclength[:-1], centre_s, mesh.total_length)


def _moments(mesh: TriMesh, values: np.ndarray, centre_s: float) -> tuple[float, float, float]:
    left, right = _segment_nodes(mesh)
    h = mesh.segment_lengths
    s0 = mesh.arclength[:-1]
    m0 = m1 = m2 = 0.0
    for x, w in zip(_GAUSS_X, _GAUSS_W):
        rho = w * h * ((1 - x) * values[left] + x * values[right])
        d = _wrapped(s0 + x * h, centre_s, mesh.total_length)
        m0 += rho.sum()
        m1 += (rho * d).sum()
        m2 += (rho * d * d).sum()
    return m0, m1, m2


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True, eq=False)
class DensityField:
    """Marginal density of one electrode on the boundary.

    For ``kind == "dirac"`` the nodal values are the barycentric load weights of
    the point, not a P1 density.
    """

    mesh: TriMesh = field(repr=False)
    values: np.ndarray = field(repr=False)
    kind: str
    center: BoundaryPoint
    spread: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DensityError(f"unknown density kind {self.kind!r}")
        if self.values.shape != (self.mesh.n_boundary,):
            raise DensityError("one nodal value per boundary vertex required")
        if np.any(self.values < 0):
            raise DensityError("density values must be nonnegative")
        self.values.setflags(write=False)

    @property
    def degenerate(self) -> bool:
        return self.kind == "dirac"

    def load(self) -> np.ndarray:
        """Boundary-indexed ``int rho * phi_k``."""
        if self.degenerate:
            return np.array(self.values)
        return boundary_load(self.mesh, self.values)

    def mass(self) -> np.ndarray:
        """Boundary matrix ``int rho * phi_p * phi_q``."""
        if self.degenerate:
            return np.outer(self.values, self.values)
        return weighted_boundary_mass(self.mesh, self.values)

    def integral(self) -> float:
        return float(self.load().sum())

    def arclength_mean_variance(self) -> tuple[float, float]:
        """Mean offset from the centre and variance of the arclength coordinate."""
        if self.degenerate:
            d = arclength_offsets(self.mesh, self.center.arclength)
            m1 = float(self.values @ d)
            return m1, float(self.values @ d**2) - m1 * m1
        m0, m1, m2 = _moments(self.mesh, self.values, self.center.arclength)
        mean = m1 / m0
        return mean, m2 / m0 - mean * mean

    def arclength_std(self) -> float:
        return float(np.sqrt(max(self.arclength_mean_variance()[1], 0.0)))


def _normalised(mesh: TriMesh, values: np.ndarray) -> np.ndarray:
    total = boundary_integral(mesh, values)
    if total <= 0:
        raise DensityError("density has zero mass")
    return values / total


def _check_spread(mesh: TriMesh, r: float) -> None:
    if r <= 0:
        raise DensityError(f"spread must be positive, got {r}")
    if 2 * r >= mesh.total_length:
        raise DensityError("support diameter exceeds the boundary length")


def _indicator_projection(mesh: TriMesh, centre_s: float, half_width: float) -> np.ndarray:
    """Lumped L2 projection of the indicator of the geodesic ball onto P1.

    Node ``k`` gets ``int chi phi_k / int phi_k``, integrated exactly over the
    overlap of the ball with the two segments adjacent to ``k``.
    """
    left, right = _segment_nodes(mesh)
    h = mesh.segment_lengths
    d0 = arclength_offsets(mesh, centre_s)
    num = np.zeros(mesh.n_boundary)
    # offsets along each segment run from d0[left] to d0[left] + h, unless the
    # segment straddles the antipode, where the ball never reaches
    a = np.clip((-half_width - d0[left]) / h, 0.0, 1.0)
    b = np.clip((half_width - d0[left]) / h, 0.0, 1.0)
    far = d0[left] + h > 0.5 * mesh.total_length + 1e-12
    a = np.where(far, 0.0, a)
    b = np.where(far, 0.0, b)
    # int_a^b (1 - x) dx and int_a^b x dx, scaled by h
    num_l = h * ((b - a) - 0.5 * (b * b - a * a))
    num_r = h * 0.5 * (b * b - a * a)
    np.add.at(num, left, num_l)
    np.add.at(num, right, num_r)
    dual = 0.5 * (h + np.roll(h, 1))
    return num / dual


def uniform_density(mesh: TriMesh, center: BoundaryPoint, r: float) -> DensityField:
    """Uniform density on the geodesic ball of radius ``r`` about ``center``.

    The indicator is projected onto P1; the projection smears the jumps over one
    element, so the ball radius used for the projection is adjusted until the
    discrete arclength variance equals that of the continuous uniform law,
    ``r**2 / 3``.
    """
    _check_spread(mesh, r)
    target = r * r / 3.0

    def excess(w):
        vals = _indicator_projection(mesh, center.arclength, w)
        if not np.any(vals > 0):
            return -target
        m0, m1, m2 = _moments(mesh, vals, center.arclength)
        return m2 / m0 - (m1 / m0) ** 2 - target

    lo, hi = 0.25 * r, r
    while excess(hi) < 0 and 2 * hi < mesh.total_length:
        hi *= 1.25
    if excess(lo) > 0:
        # boundary too coarse to resolve the ball; fall back to the plain projection
        width = r
    else:
        width = brentq(excess, lo, hi, xtol=1e-14, rtol=1e-14)
    vals = _normalised(mesh, _indicator_projection(mesh, center.arclength, width))
    return DensityField(mesh, vals, "uniform", center, float(r))


def _heat_operators(mesh: TriMesh):
    nb = mesh.n_boundary
    h = mesh.segment_lengths
    left, right = _segment_nodes(mesh)
    lumped = 0.5 * (h + np.roll(h, 1))
    stiff = np.zeros((nb, nb))
    np.add.at(stiff, (left, left), 1 / h)
    np.add.at(stiff, (right, right), 1 / h)
    np.add.at(stiff, (left, right), -1 / h)
    np.add.at(stiff, (right, left), -1 / h)
    return lumped, stiff


def heat_kernel(mesh: TriMesh, center: BoundaryPoint, total_time: float, n_steps: int = 20) -> np.ndarray:
    """Implicit Euler solution of ``u_t = u_ss`` on the closed boundary from a Dirac at ``center``.

    Lumped mass keeps the system an M-matrix, so the iterates stay positive.
    """
    lumped, stiff = _heat_operators(mesh)
    w = _dirac_weights(mesh, center)
    u = w / lumped
    if total_time <= 0:
        return u
    lu = lu_factor(np.diag(lumped) + (total_time / n_steps) * stiff)
    for _ in range(n_steps):
        u = lu_solve(lu, lumped * u)
    return u


def gaussian_density(mesh: TriMesh, center: BoundaryPoint, r: float, n_steps: int = 20) -> DensityField:
    """Gaussian-like density: boundary heat kernel diffused to arclength std ``r / sqrt(3)``."""
    _check_spread(mesh, r)
    if n_steps < 20:
        raise DensityError("at least 20 heat steps are required")
    target = r / np.sqrt(3.0)

    def excess(t):
        u = heat_kernel(mesh, center, t, n_steps)
        m0, m1, m2 = _moments(mesh, u, center.arclength)
        return np.sqrt(m2 / m0 - (m1 / m0) ** 2) - target

    if excess(0.0) >= 0:
        raise DensityError("boundary too coarse for the requested spread")
    hi = 0.5 * target * target
    while excess(hi) < 0:
        hi *= 2.0
    t_end = brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-13)
    vals = _normalised(mesh, heat_kernel(mesh, center, t_end, n_steps))
    return DensityField(mesh, np.maximum(vals, 0.0), "gaussian", center, float(r))


def _dirac_weights(mesh: TriMesh, center: BoundaryPoint) -> np.ndarray:
    w = np.zeros(mesh.n_boundary)
    k = center.segment
    w[k] += 1.0 - center.local
    w[(k + 1) % mesh.n_boundary] += center.local
    return w


def dirac_density(mesh: TriMesh, center: BoundaryPoint) -> DensityField:
    return DensityField(mesh, _dirac_weights(mesh, center), "dirac", center, 0.0)


def make_density(mesh: TriMesh, kind: str, center: BoundaryPoint, spread: float = 0.0, **kw) -> DensityField:
    if kind == "uniform":
        return uniform_density(mesh, center, spread)
    if kind == "gaussian":
        return gaussian_density(mesh, center, spread, **kw)
    if kind == "dirac":
        return dirac_density(mesh, center)
    raise DensityError(f"unknown density kind {kind!r}")


# ---------------------------------------------------------------------------
# sampling


def sample_positions(density: DensityField, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` inverse-CDF samples as arrays of (segment index, local coordinate)."""
    mesh = density.mesh
    if density.degenerate:
        return (np.full(n, density.center.segment, dtype=np.int64),
                np.full(n, density.center.local))
    left, right = _segment_nodes(mesh)
    h = mesh.segment_lengths
    r0, r1 = density.values[left], density.values[right]
    cell = 0.5 * h * (r0 + r1)
    cdf = np.cumsum(cell)
    u = rng.random(n) * cdf[-1]
    seg = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    q = (u - (cdf[seg] - cell[seg])) / h[seg]
    a, b = r0[seg], r1[seg]
    # solve a t + (b - a) t^2 / 2 = q in the cancellation-free form
    disc = np.maximum(a * a + 2.0 * (b - a) * q, 0.0)
    denom = a + np.sqrt(disc)
    t = np.where(denom > 0, 2.0 * q / np.where(denom > 0, denom, 1.0), 0.0)
    return seg.astype(np.int64), np.clip(t, 0.0, 1.0)


def sample(density: DensityField, rng: np.random.Generator) -> BoundaryPoint:
    """One electrode position drawn from ``density``."""
    if density.degenerate:
        return density.center
    seg, t = sample_positions(density, rng, 1)
    return _make_point(density.mesh, int(seg[0]), float(t[0]))


def cdf_at(density: DensityField, s: np.ndarray) -> np.ndarray:
    """Exact CDF of the P1 density in the arclength coordinate ``s`` (from 0 to the total length)."""
    mesh = density.mesh
    left, right = _segment_nodes(mesh)
    h = mesh.segment_lengths
    r0, r1 = density.values[left], density.values[right]
    cell = 0.5 * h * (r0 + r1)
    before = np.concatenate([[0.0], np.cumsum(cell)])
    s = np.asarray(s, dtype=float)
    k = np.clip(np.searchsorted(mesh.arclength, s, side="right") - 1, 0, len(h) - 1)
    t = np.clip((s - mesh.arclength[k]) / h[k], 0.0, 1.0)
    part = h[k] * (r0[k] * t + 0.5 * (r1[k] - r0[k]) * t * t)
    return (before[k] + part) / before[-1]


# ---------------------------------------------------------------------------
# joint model


@dataclass(frozen=True, eq=False)
class JointDensityModel:
    """Marginals of all electrodes, independent unless pairwise marginals are given.

    ``pairwise[(l, m)]`` holds nodal values of the pair density on the boundary
    tensor grid (bilinear interpolation), for ``l != m``.
    """

    densities: Sequence[DensityField]
    pairwise: dict[tuple[int, int], np.ndarray] | None = None

    def __post_init__(self):
        if len(self.densities) < 2:
            raise DensityError("at least two electrodes required")
        meshes = {id(d.mesh) for d in self.densities}
        if len(meshes) != 1:
            raise DensityError("all densities must live on the same mesh")

    @property
    def mesh(self) -> TriMesh:
        return self.densities[0].mesh

    @property
    def independent(self) -> bool:
        return not self.pairwise

    def pair_load(self, l: int, m: int) -> np.ndarray:
        """Boundary matrix ``int int rho_lm(x, x') phi_p(x) phi_q(x')``."""
        if self.pairwise and (l, m) in self.pairwise:
            vals = np.asarray(self.pairwise[(l, m)], dtype=float)
            nb = self.mesh.n_boundary
            if vals.shape != (nb, nb):
                raise DensityError(f"pairwise marginal ({l}, {m}) has shape {vals.shape}, expected {(nb, nb)}")
            mass = weighted_boundary_mass(self.mesh)
            return mass @ vals @ mass
        return np.outer(self.densities[l].load(), self.densities[m].load())
