"""Staged runs behind the command-line interface.

Every stage runs inside :func:`stage`, so a failure surfaces as a
:class:`PipelineError` naming the stage and the underlying cause.
"""
from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .activation import ActivationMap, monodomain_tensor, solve_eikonal_heat, time_grid, transmembrane_series
from .assembly import assemble_correlation, assemble_stiffness, vm_load_operator
from .config import RunConfig
from .density import JointDensityModel, make_density
from .ecg import EcgStatistics, LeadDefinition, correlation_ecg, deterministic_ecg, vm_loads_from
from .linsolve import SingularSolver
from .mesh import BoundaryPoint, FiberField, TriMesh, build_idealized_geometry, electrode_anchor, load_mesh, save_mesh, write_vtk
from .oracle import ForwardBidomainSolution, forward_bidomain, full_tensor_correlation, mc_statistics, pointwise_ecg
from . import __version__, report

VERSION = __version__


class PipelineError(RuntimeError):
    def __init__(self, stage_name: str, cause: BaseException):
        self.stage = stage_name
        self.cause = cause
        super().__init__(f"stage '{stage_name}' failed: {type(cause).__name__}: {cause}")


@contextmanager
def stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


# ---------------------------------------------------------------------------
# problem setup


@dataclass(eq=False)
class Problem:
    """Mesh, operators and transmembrane loads shared by all commands."""

    config: RunConfig
    mesh: TriMesh
    fibers: FiberField | None
    solver: SingularSolver
    times: np.ndarray
    activation: ActivationMap | None = None
    vm_loads: np.ndarray | None = None
    anchors: dict[str, BoundaryPoint] = field(default_factory=dict)
    _densities: dict = field(default_factory=dict)

    def electrodes(self, lead: LeadDefinition) -> list[BoundaryPoint]:
        return [self.anchors[n] for n in lead.electrodes]

    def densities(self, lead: LeadDefinition, kind: str) -> JointDensityModel:
        out = []
        for name in lead.electrodes:
            key = (name, kind)
            if key not in self._densities:
                spec = self.config.electrode(name)
                kw = {"n_steps": self.config.densities.heat_steps} if kind == "gaussian" else {}
                self._densities[key] = make_density(self.mesh, kind, self.anchors[name], spec.radius_cm, **kw)
            out.append(self._densities[key])
        return JointDensityModel(out)


def build_mesh(config: RunConfig) -> tuple[TriMesh, FiberField | None]:
    with stage("mesh"):
        if config.mesh_file:
            return load_mesh(config.mesh_file)
        return build_idealized_geometry(config.geometry)


def setup(config: RunConfig, with_activation: bool = True) -> Problem:
    mesh, fibers = build_mesh(config)
    with stage("assembly"):
        if fibers is None:
            raise ValueError("mesh has no fiber field; heart conductivities need fibers")
        K = assemble_stiffness(mesh, fibers, config.conductivity)
        maxiter = config.solver.max_iterations or None
        solver = SingularSolver(K, tol=config.solver.tol, method=config.solver.method, maxiter=maxiter)
        times = time_grid(config.time.t_end_ms, config.time.dt_ms)
    with stage("electrodes"):
        semi = (config.geometry.torso_semi_x_cm, config.geometry.torso_semi_y_cm)
        anchors = {e.name: electrode_anchor(mesh, e.angle_rad, None if config.mesh_file else semi)
                   for e in config.electrodes}
    prob = Problem(config, mesh, fibers, solver, times, anchors=anchors)
    if with_activation:
        with stage("activation"):
            a = config.activation
            model = monodomain_tensor(config.conductivity, fibers, a.cv_long_cm_per_s,
                                      (a.source_x_cm, a.source_y_cm), a.heat_dt_ms)
            prob.activation = solve_eikonal_heat(mesh, model)
        with stage("transmembrane loads"):
            vm = transmembrane_series(prob.activation, a.template(), times, mesh.n_vertices)
            prob.vm_loads = vm_loads_from(vm_load_operator(mesh, fibers, config.conductivity), vm)
    return prob


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


ECG_COLUMNS = ["t", "V_det", "E", "Var", "band_lo", "band_hi"]


def write_ecg_csv(path: Path, stats: EcgStatistics) -> Path:
    lo, hi = stats.band()
    cols = (stats.times, stats.deterministic, stats.mean, stats.variance, lo, hi)
    return write_csv(path, ECG_COLUMNS, zip(*cols))


def file_checksum(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, config: RunConfig, outputs: list[Path]) -> Path:
    """Record inputs, versions and output checksums; entries of other commands are kept."""
    path = out / "manifest.json"
    manifest = {}
    if path.exists():
        try:
            manifest = json.loads(path.read_text())
        except json.JSONDecodeError:
            manifest = {}
    if manifest.get("config_checksum") != config.checksum():
        manifest = {}
    manifest.update({
        "config_checksum": config.checksum(),
        "config": config.canonical(),
        "versions": {"ecguq": VERSION, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    })
    manifest.setdefault("commands", {})[command] = {
        "outputs": {p.name: file_checksum(p) for p in sorted(outputs)},
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report_dict(rep) -> dict:
    return {"iterations": rep.iterations, "residual": rep.residual,
            "compatibility_defect": rep.compatibility_defect, "method": rep.method, "gauge": rep.gauge}


# ---------------------------------------------------------------------------
# commands


@dataclass(eq=False)
class UqResult:
    statistics: dict[tuple[str, str], EcgStatistics]
    outputs: list[Path]
    summary: dict


def cmd_mesh(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    mesh, fibers = build_mesh(config)
    with stage("output"):
        paths = [out / "mesh.txt", out / "mesh.vtk"]
        save_mesh(mesh, fibers, paths[0])
        cells = None
        if fibers is not None:
            fib = np.zeros((len(mesh.triangles), 2))
            fib[fibers.triangles] = fibers.vectors
            cells = {"fiber": fib}
        write_vtk(paths[1], mesh, cell_data=cells, title="ecguq mesh")
        write_manifest(out, "mesh", config, paths)
    return paths


def cmd_activation(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    prob = setup(config)
    with stage("output"):
        act = prob.activation
        xy = prob.mesh.vertices[act.vertices]
        paths = [write_csv(out / "activation.csv", ["vertex", "x_cm", "y_cm", "tau_ms"],
                           zip(act.vertices, xy[:, 0], xy[:, 1], act.tau))]
        tau_full = act.full(prob.mesh.n_vertices, fill=-1.0)
        vtk = out / "activation.vtk"
        write_vtk(vtk, prob.mesh, point_data={"tau_ms": tau_full}, title="activation time (ms), -1 off the heart")
        paths.append(vtk)
        write_manifest(out, "activation", config, paths)
    return paths


def run_pipeline(config: RunConfig, write: bool = True, prob: Problem | None = None) -> UqResult:
    """Lead-field statistics for every configured lead and density kind, plus CSV/VTK output."""
    t_start = time.perf_counter()
    prob = prob or setup(config)
    results: dict[tuple[str, str], EcgStatistics] = {}
    summary = {"config_checksum": config.checksum(), "n_vertices": prob.mesh.n_vertices,
               "n_boundary": prob.mesh.n_boundary, "runs": []}
    for lead in config.lead_definitions():
        for kind in config.densities.kinds:
            with stage(f"lead-field statistics ({lead.name}, {kind})"):
                dens = prob.densities(lead, kind)
                stats = correlation_ecg(prob.solver, prob.mesh, lead, prob.electrodes(lead), dens, prob.vm_loads,
                                        prob.times, tol=config.solver.cholesky_tol, keep_fields=write)
            results[(lead.name, kind)] = stats
            corr = stats.reports["correlation"]
            summary["runs"].append({
                "lead": lead.name, "density": kind, "rank": stats.rank,
                "cholesky": stats.reports["cholesky"],
                "solver": {
                    "deterministic": _report_dict(stats.reports["deterministic"]),
                    "expectation": _report_dict(stats.reports["expectation"]),
                    "correlation_max_iterations": max((r.iterations for r in corr), default=0),
                    "correlation_max_residual": max((r.residual for r in corr), default=0.0),
                },
                "timings_s": stats.timings,
            })
    summary["total_time_s"] = time.perf_counter() - t_start
    outputs: list[Path] = []
    if write:
        out = _out_dir(config)
        with stage("output"):
            for (lname, kind), stats in results.items():
                outputs.append(write_ecg_csv(out / f"ecg_{lname}_{kind}.csv", stats))
                f = stats.fields
                nmodes = min(config.output.vtk_modes, f["zetas"].shape[1])
                pdata = {"z_det": f["z_det"], "z": f["z"]}
                pdata.update({f"zeta_{k + 1}": f["zetas"][:, k] for k in range(nmodes)})
                vtk = out / f"leadfield_{lname}_{kind}.vtk"
                write_vtk(vtk, prob.mesh, point_data=pdata, title=f"lead fields {lname} {kind}")
                outputs.append(vtk)
                stats.fields = None
            outputs.append(report.write_summary(out / "summary.csv", report.summarize(results)))
            (out / "run_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
            write_manifest(out, "uq", config, outputs)
    return UqResult(results, outputs, summary)


SNAPSHOT_TIMES_MS = (20.0, 50.0, 90.0, 110.0)


def run_forward(prob: Problem) -> ForwardBidomainSolution:
    with stage("forward solve"):
        return forward_bidomain(prob.solver, prob.mesh, prob.vm_loads, prob.times)


def cmd_forward(config: RunConfig) -> list[Path]:
    out = _out_dir(config)
    prob = setup(config)
    fwd = run_forward(prob)
    with stage("output"):
        mesh = prob.mesh
        xy = mesh.vertices[mesh.boundary]
        header = ["node", "s_cm", "x_cm", "y_cm"] + [f"u_t{_fmt(t)}" for t in prob.times]
        rows = ([int(n), s, x, y, *u] for n, s, x, y, u in
                zip(mesh.boundary, mesh.arclength[:-1], xy[:, 0], xy[:, 1], fwd.traces))
        paths = [write_csv(out / "forward_traces.csv", header, rows)]
        for lead in config.lead_definitions():
            v = pointwise_ecg(fwd, prob.electrodes(lead), lead.a)
            paths.append(write_csv(out / f"forward_ecg_{lead.name}.csv", ["t", "V"], zip(prob.times, v)))
        for t in SNAPSHOT_TIMES_MS:
            j = np.flatnonzero(np.isclose(prob.times, t))
            if len(j):
                u, _ = prob.solver.solve(-prob.vm_loads[:, j[0]])
                vtk = out / f"forward_t{int(t):03d}.vtk"
                write_vtk(vtk, mesh, point_data={"u_mv": u}, title=f"extracellular potential t={t} ms")
                paths.append(vtk)
        write_manifest(out, "forward", config, paths)
    return paths


@dataclass
class Check:
    name: str
    lead: str
    density: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.threshold)


def reciprocity_errors(prob: Problem, fwd: ForwardBidomainSolution, lead: LeadDefinition):
    """Lead-field and forward ECG of one lead, with max absolute and relative L-infinity errors."""
    v_lf, _, _ = deterministic_ecg(prob.solver, prob.mesh, lead, prob.electrodes(lead), prob.vm_loads)
    v_fw = pointwise_ecg(fwd, prob.electrodes(lead), lead.a)
    err = np.abs(v_lf - v_fw)
    scale = max(float(np.max(np.abs(v_fw))), 1e-300)
    return v_lf, v_fw, float(err.max()), float(err.max() / scale)


def full_tensor_error(prob: Problem, lead: LeadDefinition, kind: str, n_grid: int = 20, tol: float = 1e-12):
    """Relative Frobenius error of the factored correlation against the dense tensor solve."""
    dens = prob.densities(lead, kind)
    idx = np.unique(np.linspace(0, len(prob.times) - 1, n_grid).round().astype(int))
    loads = prob.vm_loads[:, idx]
    stats = correlation_ecg(prob.solver, prob.mesh, lead, prob.electrodes(lead), dens, loads, prob.times[idx], tol=tol)
    R = assemble_correlation(prob.mesh, dens, lead.a)
    oracle = full_tensor_correlation(prob.solver.K, R, loads)
    got = stats.correlation()
    denom = max(float(np.linalg.norm(oracle)), 1e-300)
    return float(np.linalg.norm(got - oracle) / denom), stats.rank


def cmd_validate(config: RunConfig) -> tuple[list[Path], list[Check]]:
    out = _out_dir(config)
    prob = setup(config)
    t0 = time.perf_counter()
    fwd = run_forward(prob)
    t_forward = time.perf_counter() - t0
    checks: list[Check] = []
    paths: list[Path] = []
    reciprocity = {}
    with stage("reciprocity"):
        for lead in config.lead_definitions():
            v_lf, v_fw, abs_err, rel_err = reciprocity_errors(prob, fwd, lead)
            reciprocity[lead.name] = abs_err
            scale = max(float(np.max(np.abs(v_fw))), 1e-300)
            rows = zip(prob.times, v_lf, v_fw, np.abs(v_lf - v_fw), np.abs(v_lf - v_fw) / scale)
            paths.append(write_csv(out / f"reciprocity_{lead.name}.csv",
                                   ["t", "comparand", "oracle", "abs_err", "rel_err"], rows))
            checks.append(Check("reciprocity_rel_linf", lead.name, "point", rel_err, 1e-2))
    if prob.mesh.n_vertices <= 500:
        with stage("full tensor"):
            rows = []
            for lead in config.lead_definitions():
                for kind in config.densities.kinds:
                    err, rank = full_tensor_error(prob, lead, kind)
                    rows.append((lead.name, kind, rank, err))
                    checks.append(Check("full_tensor_rel_frobenius", lead.name, kind, err, 1e-6))
            paths.append(write_csv(out / "full_tensor.csv", ["lead", "density", "rank", "rel_frobenius"], rows))
    t0 = time.perf_counter()
    uq = run_pipeline(config, write=False, prob=prob)
    t_leadfield = time.perf_counter() - t0
    with stage("output"):
        paths.append(write_csv(out / "validation.csv", ["check", "lead", "density", "value", "threshold", "passed"],
                               ((c.name, c.lead, c.density, c.value, c.threshold, c.passed) for c in checks)))
        table = report.summarize(uq.statistics, reciprocity)
        paths.append(report.write_summary(out / "summary.csv", table))
        timing = report.timing_comparison(t_leadfield, t_forward, len(uq.statistics))
        (out / "timings.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
        write_manifest(out, "validate", config, paths)
    return paths, checks


def cmd_mc(config: RunConfig) -> tuple[list[Path], list[Check]]:
    out = _out_dir(config)
    prob = setup(config)
    fwd = run_forward(prob)
    checks: list[Check] = []
    paths: list[Path] = []
    uq = run_pipeline(config, write=False, prob=prob)
    with stage("monte carlo"):
        for lead in config.lead_definitions():
            for kind in config.densities.kinds:
                st = uq.statistics[(lead.name, kind)]
                mc = mc_statistics(fwd, prob.densities(lead, kind), lead.a, config.monte_carlo.n_samples, config.seed)
                floor = 1e-8 * float(np.max(np.abs(st.mean)))
                z_e = _zscore(st.mean - mc.mean, mc.stderr_mean, floor)
                z_v = _zscore(st.variance - mc.variance, mc.stderr_variance, floor**2)
                rows = zip(prob.times, st.mean, mc.mean, mc.stderr_mean, st.variance, mc.variance, mc.stderr_variance)
                paths.append(write_csv(out / f"mc_{lead.name}_{kind}.csv",
                                       ["t", "E", "E_hat", "stderr_E", "Var", "Var_hat", "stderr_Var"], rows))
                checks.append(Check("mc_mean_max_z", lead.name, kind, z_e, 3.0))
                checks.append(Check("mc_variance_max_z", lead.name, kind, z_v, 3.0))
    with stage("output"):
        paths.append(write_csv(out / "mc_checks.csv", ["check", "lead", "density", "value", "threshold", "passed"],
                               ((c.name, c.lead, c.density, c.value, c.threshold, c.passed) for c in checks)))
        write_manifest(out, "mc", config, paths)
    return paths, checks


def _zscore(diff: np.ndarray, se: np.ndarray, floor: float = 0.0) -> float:
    """Largest ``|diff| / se``; differences below ``floor`` (solver accuracy) count as zero."""
    diff = np.where(np.abs(diff) <= floor, 0.0, np.abs(diff))
    z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 0, np.inf, 0.0))
    return float(z.max())
