"""Accuracy of the heat-method activation times on two analytic cases.

* strip with fibers along x and a planar source: wave speed from the slope of tau(x),
* isotropic disc with a point source: max relative error of tau against r / v.

Usage: python scripts/eikonal_convergence.py
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from ecguq.activation import heat_method, monodomain_tensor
from ecguq.assembly import ConductivityModel
from ecguq.mesh import FiberField


def strip_speed(h: float, dt: float, cv: float = 65.0) -> float:
    x, y = np.meshgrid(np.linspace(0, 6, int(round(6 / h)) + 1), np.linspace(0, 1, int(round(1 / h)) + 1))
    pts = np.column_stack([x.ravel(), y.ravel()])
    tri = Delaunay(pts).simplices
    fibers = FiberField(np.arange(len(tri)), np.tile([1.0, 0.0], (len(tri), 1)))
    model = monodomain_tensor(ConductivityModel(), fibers, cv, dt_ms=dt)
    tau = heat_method(pts, tri, model.D, np.flatnonzero(pts[:, 0] < 1e-12), dt)
    sel = (pts[:, 0] > 1) & (pts[:, 0] < 5)
    return 1000.0 / np.polyfit(pts[sel, 0], tau[sel], 1)[0]


def disc_error(h: float, v: float = 0.1, radius: float = 3.0) -> float:
    pts = [[0.0, 0.0]]
    for r in np.arange(h, radius + 1e-9, h):
        n = max(6, int(round(2 * np.pi * r / h)))
        th = np.arange(n) * 2 * np.pi / n + 0.5 * r / h
        pts += list(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    pts = np.array(pts)
    tri = Delaunay(pts).simplices
    D = np.repeat((v * v * np.eye(2))[None], len(tri), axis=0)
    tau = heat_method(pts, tri, D, [0], h * h / (v * v))
    r = np.hypot(*pts.T)
    sel = r > 0.5
    return float(np.max(np.abs(tau[sel] - r[sel] / v) / (r[sel] / v)))


def main() -> None:
    print("strip: h_cm dt_ms cv_cm_per_s")
    for h in (0.1, 0.05, 0.025):
        for dt in (4.0, 1.0):
            print(f"  {h:<6} {dt:<5} {strip_speed(h, dt):.3f}")
    print("disc: h_cm max_rel_err")
    for h in (0.2, 0.1, 0.05):
        print(f"  {h:<6} {disc_error(h):.4f}")


if __name__ == "__main__":
    main()
