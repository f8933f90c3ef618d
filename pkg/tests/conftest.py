from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.spatial import Delaunay

from ecguq.config import load_config
from ecguq.mesh import GeometryParams, Region, TriMesh, build_idealized_geometry
from ecguq.pipeline import setup

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


def grid_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0, region: Region = Region.TORSO) -> TriMesh:
    """Delaunay triangulation of a rectangular grid, all triangles tagged ``region``."""
    x, y = np.meshgrid(np.linspace(0, lx, nx), np.linspace(0, ly, ny))
    pts = np.column_stack([x.ravel(), y.ravel()])
    tri = Delaunay(pts).simplices
    p = pts[tri]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    tri[area2 < 0] = tri[area2 < 0][:, [0, 2, 1]]
    return TriMesh(pts, tri, np.full(len(tri), int(region)))


@pytest.fixture(scope="session")
def tiny_config():
    return load_config(CONFIGS / "tiny.toml")


@pytest.fixture(scope="session")
def tiny_problem(tiny_config):
    return setup(tiny_config)


@pytest.fixture(scope="session")
def desk_config():
    return load_config(CONFIGS / "desk.toml")


@pytest.fixture(scope="session")
def desk_problem(desk_config):
    return setup(desk_config)


@pytest.fixture(scope="session")
def benchmark_config():
    return load_config(CONFIGS / "benchmark.toml")


@pytest.fixture(scope="session")
def benchmark_problem(benchmark_config):
    return setup(benchmark_config)


@pytest.fixture(scope="session")
def bench_geometry():
    return build_idealized_geometry(GeometryParams())


@pytest.fixture(scope="session")
def small_geometry():
    return build_idealized_geometry(GeometryParams(heart_edge_cm=0.5, torso_edge_cm=2.0))


# acceptance verdicts, printed once per criterion at the end of the session
VERDICTS: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def verdict():
    def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
        VERDICTS.setdefault(criterion, []).append((part, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {criterion} ({part}) {detail}")
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(VERDICTS):
        parts = VERDICTS[c]
        ok = all(p[1] for p in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {c}: " +
                      "; ".join(f"{name} {'ok' if good else 'FAILED'} {detail}".rstrip() for name, good, detail in parts))
