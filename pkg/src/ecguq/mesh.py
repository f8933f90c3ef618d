"""Triangulations of the idealized 2-D torso with an annular heart.

The heart annulus is meshed with a structured polar grid (radial lines times
rings), so that element edges are aligned with the circular fibers.  Blood pool
and torso are filled with graded concentric rings of points around the heart
centre and triangulated by Delaunay; the annulus rings are Gabriel edges of
that triangulation, which keeps the interface conforming.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay


class Region(enum.IntEnum):
    HEART = 1
    BLOOD = 2
    TORSO = 3


class MeshError(ValueError):
    pass


class MeshFormatError(MeshError):
    pass


class MeshIndexError(MeshFormatError, IndexError):
    pass


class MeshTopologyError(MeshError):
    pass


@dataclass(frozen=True)
class GeometryParams:
    """Idealized heart-torso geometry, lengths in cm."""

    torso_semi_x_cm: float = 10.0
    torso_semi_y_cm: float = 15.0
    heart_center_cm: tuple[float, float] = (-4.0, 2.0)
    endo_radius_cm: float = 2.0
    epi_radius_cm: float = 3.0
    heart_edge_cm: float = 0.04
    torso_edge_cm: float = 0.5
    grading: float = 0.5

    def validate(self) -> None:
        if self.torso_semi_x_cm <= 0 or self.torso_semi_y_cm <= 0:
            raise MeshError("torso semi-axes must be positive")
        if not 0 < self.endo_radius_cm < self.epi_radius_cm:
            raise MeshError("need 0 < endo radius < epi radius")
        if self.heart_edge_cm <= 0 or self.torso_edge_cm <= 0 or self.grading <= 0:
            raise MeshError("edge sizes and grading must be positive")
        # the epicardial circle must clear the ellipse everywhere
        theta = np.linspace(0.0, 2 * np.pi, 721)
        cx, cy = self.heart_center_cm
        x = cx + self.epi_radius_cm * np.cos(theta)
        y = cy + self.epi_radius_cm * np.sin(theta)
        level = (x / self.torso_semi_x_cm) ** 2 + (y / self.torso_semi_y_cm) ** 2
        if np.any(level >= 1.0):
            raise MeshError("heart annulus is not strictly inside the torso ellipse")


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Tagged triangle mesh with its ordered outer boundary.

    ``boundary`` lists the boundary vertices counterclockwise, starting at the
    vertex closest to angle zero; segment ``k`` joins ``boundary[k]`` and
    ``boundary[(k + 1) % nb]``.  ``arclength`` has ``nb + 1`` entries, from 0 to
    the total boundary length.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    boundary: np.ndarray = field(init=False)
    arclength: np.ndarray = field(init=False)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        tags = np.ascontiguousarray(self.tags, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshFormatError("vertices must have shape (n, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshFormatError("triangles must have shape (m, 3)")
        if tags.shape != (len(triangles),):
            raise MeshFormatError("one region tag per triangle required")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshIndexError("triangle references a missing vertex")
        if not np.all(np.isin(tags, [r.value for r in Region])):
            raise MeshFormatError(f"unknown region tag in {np.unique(tags)}")
        boundary = _boundary_loop(vertices, triangles)
        pts = vertices[np.append(boundary, boundary[0])]
        seg = np.hypot(*np.diff(pts, axis=0).T)
        arclength = np.concatenate([[0.0], np.cumsum(seg)])
        for name, arr in (("vertices", vertices), ("triangles", triangles), ("tags", tags),
                          ("boundary", boundary), ("arclength", arclength)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    @property
    def total_length(self) -> float:
        return float(self.arclength[-1])

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.diff(self.arclength)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def region_triangles(self, region: Region) -> np.ndarray:
        return np.flatnonzero(self.tags == int(region))

    def region_vertices(self, region: Region) -> np.ndarray:
        return np.unique(self.triangles[self.tags == int(region)])

    def edges(self, region: Region | None = None) -> np.ndarray:
        tri = self.triangles if region is None else self.triangles[self.tags == int(region)]
        e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self, region: Region | None = None) -> np.ndarray:
        e = self.edges(region)
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])


@dataclass(frozen=True, eq=False)
class FiberField:
    """Unit fiber directions on the heart triangles, in the order of ``triangles``."""

    triangles: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.shape != (len(self.triangles), 2):
            raise MeshFormatError("one 2-D fiber vector per heart triangle required")
        norms = np.hypot(self.vectors[:, 0], self.vectors[:, 1])
        if len(norms) and np.max(np.abs(norms - 1.0)) > 1e-9:
            raise MeshFormatError("fiber vectors must have unit length")

    def per_triangle(self, n_triangles: int) -> np.ndarray:
        """Fibers scattered to all triangles; zero outside the heart."""
        out = np.zeros((n_triangles, 2))
        out[self.triangles] = self.vectors
        return out


@dataclass(frozen=True)
class BoundaryPoint:
    """A point on the boundary polyline: segment index and local coordinate in [0, 1]."""

    segment: int
    local: float
    arclength: float
    xy: tuple[float, float]


def circular_fibers(mesh: TriMesh, center) -> FiberField:
    """Fibers tangent to circles around ``center`` (counterclockwise)."""
    heart = mesh.region_triangles(Region.HEART)
    d = mesh.barycenters()[heart] - np.asarray(center, dtype=float)
    r = np.hypot(d[:, 0], d[:, 1])
    vectors = np.column_stack([-d[:, 1], d[:, 0]]) / r[:, None]
    return FiberField(heart, vectors)


# ---------------------------------------------------------------------------
# generation


def _ellipse_boundary(a: float, b: float, h: float) -> np.ndarray:
    """Equal-arclength points on the ellipse, counterclockwise from angle 0.

    The point count is a multiple of four so the four axis points are vertices.
    """
    theta = np.linspace(0.0, np.pi / 2, 20001)
    pts = np.column_stack([a * np.cos(theta), b * np.sin(theta)])
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    m = max(2, int(round(s[-1] / h)))
    th = np.interp(np.linspace(0.0, s[-1], m + 1)[:-1], s, theta)
    q1 = np.column_stack([a * np.cos(th), b * np.sin(th)])
    q1[0] = (a, 0.0)
    # mirror quadrant I into II, III, IV keeping counterclockwise order
    q2 = np.vstack([[0.0, b], q1[1:][::-1] * (-1.0, 1.0)])
    q3 = -q1
    q4 = -q2
    return np.vstack([q1, q2, q3, q4])


def _ring(center, r: float, h: float, offset: float) -> np.ndarray:
    n = max(6, int(round(2 * np.pi * r / h)))
    ang = (np.arange(n) + offset) * (2 * np.pi / n)
    return np.column_stack([center[0] + r * np.cos(ang), center[1] + r * np.sin(ang)])


def _ellipse_clearance(points: np.ndarray, a: float, b: float) -> np.ndarray:
    """First-order distance from points inside the ellipse to its boundary."""
    x, y = points[:, 0], points[:, 1]
    f = np.sqrt((x / a) ** 2 + (y / b) ** 2)
    gx = x / a**2
    gy = y / b**2
    g = np.hypot(gx, gy) / np.maximum(f, 1e-300)
    return np.where(f > 0, (1.0 - f) / np.maximum(g, 1e-300), min(a, b))


def build_idealized_geometry(params: GeometryParams | None = None) -> tuple[TriMesh, FiberField]:
    p = params or GeometryParams()
    p.validate()
    a, b = p.torso_semi_x_cm, p.torso_semi_y_cm
    c = np.asarray(p.heart_center_cm, dtype=float)
    h0, hmax, g = p.heart_edge_cm, p.torso_edge_cm, p.grading
    r_in, r_out = p.endo_radius_cm, p.epi_radius_cm

    boundary = _ellipse_boundary(a, b, hmax)

    # structured annulus: n_r layers, n_t points per ring, rings at r_in..r_out
    n_r = max(1, int(round((r_out - r_in) / h0)))
    n_t = max(6, int(round(np.pi * (r_in + r_out) / h0)))
    radii = np.linspace(r_in, r_out, n_r + 1)
    ang = np.arange(n_t) * (2 * np.pi / n_t)
    heart_pts = np.concatenate(
        [np.column_stack([c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)]) for r in radii]
    )

    # graded rings outward (torso) and inward (blood)
    far = np.max(np.hypot(boundary[:, 0] - c[0], boundary[:, 1] - c[1])) + hmax
    fill = []
    r, k = r_out, 0
    while True:
        r += min(hmax, h0 + g * (r - r_out))
        if r > far:
            break
        k += 1
        pts = _ring(c, r, min(hmax, h0 + g * (r - r_out)), 0.5 * (k % 2))
        keep = _ellipse_clearance(pts, a, b) > 0.6 * hmax
        fill.append(pts[keep])
    r, k = r_in, 0
    while True:
        h = min(hmax, h0 + g * (r_in - r))
        r -= h
        if r < 0.5 * min(hmax, h0 + g * (r_in - r)):
            break
        k += 1
        fill.append(_ring(c, r, min(hmax, h0 + g * (r_in - r)), 0.5 * (k % 2)))
    fill.append(c[None, :])
    fill_pts = np.concatenate(fill)

    nb, nf = len(boundary), len(fill_pts)
    vertices = np.concatenate([boundary, fill_pts, heart_pts])
    grid = nb + nf + np.arange((n_r + 1) * n_t).reshape(n_r + 1, n_t)

    # Delaunay on everything except the annulus interior rings
    sel = np.concatenate([np.arange(nb + nf), grid[0], grid[-1]])
    tri = sel[Delaunay(vertices[sel]).simplices]
    bc = vertices[tri].mean(axis=1)
    rb = np.hypot(bc[:, 0] - c[0], bc[:, 1] - c[1])
    tri = tri[(rb < r_in) | (rb > r_out)]

    # structured annulus triangles, alternating diagonals
    i, j = np.meshgrid(np.arange(n_r), np.arange(n_t), indexing="ij")
    i, j = i.ravel(), j.ravel()
    jp = (j + 1) % n_t
    v00, v10, v11, v01 = grid[i, j], grid[i + 1, j], grid[i + 1, jp], grid[i, jp]
    alt = (i + j) % 2 == 0
    t1 = np.where(alt[:, None], np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01]))
    t2 = np.where(alt[:, None], np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01]))
    heart_tri = np.concatenate([t1, t2])

    triangles = np.concatenate([tri, heart_tri])
    p0 = vertices[triangles]
    area = 0.5 * ((p0[:, 1, 0] - p0[:, 0, 0]) * (p0[:, 2, 1] - p0[:, 0, 1])
                  - (p0[:, 1, 1] - p0[:, 0, 1]) * (p0[:, 2, 0] - p0[:, 0, 0]))
    triangles[area < 0] = triangles[area < 0][:, [0, 2, 1]]
    bc = vertices[triangles].mean(axis=1)
    rb = np.hypot(bc[:, 0] - c[0], bc[:, 1] - c[1])
    tags = np.where(rb < r_in, Region.BLOOD, np.where(rb > r_out, Region.TORSO, Region.HEART))

    mesh = TriMesh(vertices, triangles, tags)
    check_mesh(mesh)
    poly = vertices[mesh.boundary]
    poly_area = 0.5 * np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    if abs(mesh.signed_areas().sum() - poly_area) > 1e-9 * poly_area:
        raise MeshTopologyError("triangles do not tile the boundary polygon")
    return mesh, circular_fibers(mesh, c)


# ---------------------------------------------------------------------------
# topology


def _boundary_loop(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    if len(triangles) == 0:
        raise MeshTopologyError("empty mesh")
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise MeshTopologyError("non-manifold edge shared by more than two triangles")
    bedges = directed[counts[inv] == 1]
    if len(bedges) == 0:
        raise MeshTopologyError("mesh has no boundary")
    # orient boundary edges consistently with positively oriented triangles
    p = vertices[triangles]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    if np.any(sa <= 0):
        raise MeshTopologyError("triangles must have positive signed area")
    nxt: dict[int, int] = {}
    for u, v in bedges:
        if int(u) in nxt:
            raise MeshTopologyError("boundary vertex with more than two boundary edges")
        nxt[int(u)] = int(v)
    # start at the vertex closest to angle zero about the boundary centroid
    bverts = np.fromiter(nxt.keys(), dtype=np.int64)
    centre = vertices[bverts].mean(axis=0)
    d = vertices[bverts] - centre
    ang = np.abs(np.arctan2(d[:, 1], d[:, 0]))
    start = int(bverts[np.lexsort((-d[:, 0], ang))[0]])
    loop = [start]
    v = nxt[start]
    while v != start:
        loop.append(v)
        if len(loop) > len(nxt):
            raise MeshTopologyError("boundary walk does not close")
        v = nxt.get(v)
        if v is None:
            raise MeshTopologyError("boundary is not closed")
    if len(loop) != len(nxt):
        raise MeshTopologyError(f"boundary has several loops ({len(nxt) - len(loop)} edges not on the first)")
    return np.asarray(loop, dtype=np.int64)


def check_mesh(mesh: TriMesh) -> None:
    """Raise ``MeshTopologyError`` unless the mesh satisfies the structural invariants."""
    if np.any(mesh.signed_areas() <= 0):
        raise MeshTopologyError("triangles must have positive signed area")
    if np.any(np.diff(mesh.arclength) <= 0):
        raise MeshTopologyError("boundary arclength must be strictly increasing")
    heart = mesh.region_triangles(Region.HEART)
    if len(heart):
        tri = mesh.triangles[heart]
        e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        owner = np.tile(np.arange(len(tri)), 3)
        key = np.sort(e, axis=1)
        order = np.lexsort((key[:, 1], key[:, 0]))
        key, owner = key[order], owner[order]
        same = np.all(key[1:] == key[:-1], axis=1)
        a, b = owner[:-1][same], owner[1:][same]
        adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(len(tri), len(tri)))
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise MeshTopologyError(f"heart region has {n_comp} edge-connected components")


# ---------------------------------------------------------------------------
# boundary points


def boundary_point_at(mesh: TriMesh, s: float) -> BoundaryPoint:
    """Boundary point at arclength ``s`` (taken modulo the total length)."""
    L = mesh.total_length
    s = float(s) % L
    k = int(np.searchsorted(mesh.arclength, s, side="right") - 1)
    k = min(max(k, 0), mesh.n_boundary - 1)
    h = mesh.arclength[k + 1] - mesh.arclength[k]
    t = (s - mesh.arclength[k]) / h
    return _make_point(mesh, k, t)


def _make_point(mesh: TriMesh, k: int, t: float) -> BoundaryPoint:
    nb = mesh.n_boundary
    t = min(max(float(t), 0.0), 1.0)
    if t < 1e-12:
        t = 0.0
    if t > 1.0 - 1e-12:
        k, t = (k + 1) % nb, 0.0
    p0 = mesh.vertices[mesh.boundary[k]]
    p1 = mesh.vertices[mesh.boundary[(k + 1) % nb]]
    xy = (1 - t) * p0 + t * p1
    s = mesh.arclength[k] + t * (mesh.arclength[k + 1] - mesh.arclength[k])
    return BoundaryPoint(int(k), t, float(s), (float(xy[0]), float(xy[1])))


def project_to_boundary(mesh: TriMesh, xy) -> tuple[BoundaryPoint, float]:
    """Closest point of the boundary polyline to ``xy`` and its distance."""
    q = np.asarray(xy, dtype=float)
    nb = mesh.n_boundary
    p0 = mesh.vertices[mesh.boundary]
    p1 = mesh.vertices[np.roll(mesh.boundary, -1)]
    d = p1 - p0
    t = np.clip(np.einsum("ij,ij->i", q - p0, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    foot = p0 + t[:, None] * d
    dist = np.hypot(*(foot - q).T)
    k = int(np.argmin(dist))
    return _make_point(mesh, k % nb, t[k]), float(dist[k])


def locate_on_boundary(mesh: TriMesh, xy, rel_tol: float = 1e-6) -> BoundaryPoint:
    """Snap ``xy`` onto the boundary, rejecting points farther than ``rel_tol`` times its length."""
    pt, dist = project_to_boundary(mesh, xy)
    if dist > rel_tol * mesh.total_length:
        raise MeshError(f"point {tuple(xy)} is {dist:.3g} cm off the boundary")
    return pt


def ellipse_semi_axes(mesh: TriMesh) -> tuple[float, float]:
    pts = mesh.vertices[mesh.boundary]
    return float(np.max(np.abs(pts[:, 0]))), float(np.max(np.abs(pts[:, 1])))


def electrode_anchor(mesh: TriMesh, theta: float, semi_axes: tuple[float, float] | None = None) -> BoundaryPoint:
    """Mean electrode position ``(Tx cos theta, Ty sin theta)`` projected onto the boundary."""
    a, b = semi_axes or ellipse_semi_axes(mesh)
    return project_to_boundary(mesh, (a * math.cos(theta), b * math.sin(theta)))[0]


def barycentric_weights(mesh: TriMesh, point: BoundaryPoint) -> tuple[np.ndarray, np.ndarray]:
    """Global vertex indices and weights of the two endpoints of the point's segment."""
    k = point.segment
    idx = np.array([mesh.boundary[k], mesh.boundary[(k + 1) % mesh.n_boundary]])
    return idx, np.array([1.0 - point.local, point.local])


# ---------------------------------------------------------------------------
# file I/O

_FORMAT_HEADER = "ecguq-mesh 1"


def save_mesh(mesh: TriMesh, fibers: FiberField | None, path: str | os.PathLike) -> None:
    """Write the plain-text mesh format (see docs/mesh_format.md)."""
    heart = mesh.region_triangles(Region.HEART)
    if fibers is not None and not np.array_equal(fibers.triangles, heart):
        raise MeshFormatError("fiber field does not match the heart triangles")
    nfib = 0 if fibers is None else len(heart)
    lines = [_FORMAT_HEADER, f"{mesh.n_vertices} {len(mesh.triangles)} {nfib}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{i} {j} {k} {t}" for (i, j, k), t in zip(mesh.triangles.tolist(), mesh.tags.tolist())]
    if fibers is not None:
        lines += [f"{fx!r} {fy!r}" for fx, fy in fibers.vectors.tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path: str | os.PathLike) -> tuple[TriMesh, FiberField | None]:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not rows or " ".join(rows[0]) != _FORMAT_HEADER:
        raise MeshFormatError(f"{path}: missing '{_FORMAT_HEADER}' header")
    try:
        nv, nt, nf = (int(v) for v in rows[1])
    except (IndexError, ValueError) as exc:
        raise MeshFormatError(f"{path}: bad count line") from exc
    body = rows[2:]
    if len(body) != nv + nt + nf:
        raise MeshFormatError(f"{path}: expected {nv + nt + nf} data lines, found {len(body)}")
    try:
        vertices = np.array(body[:nv], dtype=float).reshape(nv, 2)
        tri = np.array(body[nv:nv + nt], dtype=np.int64).reshape(nt, 4)
        fib = np.array(body[nv + nt:], dtype=float).reshape(nf, 2)
    except ValueError as exc:
        raise MeshFormatError(f"{path}: malformed data line") from exc
    mesh = TriMesh(vertices, tri[:, :3], tri[:, 3])
    check_mesh(mesh)
    fibers = None
    if nf:
        heart = mesh.region_triangles(Region.HEART)
        if nf != len(heart):
            raise MeshFormatError(f"{path}: {nf} fibers for {len(heart)} heart triangles")
        fibers = FiberField(heart, fib)
    return mesh, fibers


def write_vtk(
    path: str | os.PathLike,
    mesh: TriMesh,
    point_data: Mapping[str, np.ndarray] | None = None,
    cell_data: Mapping[str, np.ndarray] | None = None,
    title: str = "ecguq mesh",
) -> None:
    """Legacy ASCII VTK unstructured grid; region tags are always written as cell data."""
    out = ["# vtk DataFile Version 2.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {mesh.n_vertices} double"]
    out += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    nt = len(mesh.triangles)
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    out.append(f"CELL_TYPES {nt}")
    out += ["5"] * nt
    cells = {"region": mesh.tags}
    cells.update(cell_data or {})
    out.append(f"CELL_DATA {nt}")
    for name, vals in cells.items():
        vals = np.asarray(vals)
        if vals.shape[0] != nt:
            raise ValueError(f"cell field {name!r} has {vals.shape[0]} values, expected {nt}")
        out += _vtk_field(name, vals)
    if point_data:
        out.append(f"POINT_DATA {mesh.n_vertices}")
        for name, vals in point_data.items():
            vals = np.asarray(vals)
            if vals.shape[0] != mesh.n_vertices:
                raise ValueError(f"point field {name!r} has {vals.shape[0]} values")
            out += _vtk_field(name, vals)
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _vtk_field(name: str, vals: np.ndarray) -> list[str]:
    if vals.ndim == 2 and vals.shape[1] == 2:
        rows = [f"VECTORS {name} double"]
        rows += [f"{x!r} {y!r} 0.0" for x, y in vals.astype(float).tolist()]
        return rows
    kind = "int" if np.issubdtype(vals.dtype, np.integer) else "double"
    rows = [f"SCALARS {name} {kind} 1", "LOOKUP_TABLE default"]
    rows += [repr(v) for v in vals.tolist()]
    return rows
