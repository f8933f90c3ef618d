"""Run configuration: TOML files with unit-suffixed keys, parsed into dataclasses.

Missing keys are reported with their full dotted path; unknown keys are
rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .activation import APTemplate, time_grid
from .assembly import ConductivityModel
from .ecg import LeadDefinition
from .mesh import GeometryParams


class ConfigError(ValueError):
    pass


DENSITY_KINDS = ("uniform", "gaussian", "dirac")
SOLVER_METHODS = ("cg", "direct", "dense")


@dataclass(frozen=True)
class ActivationConfig:
    cv_long_cm_per_s: float = 65.0
    source_x_cm: float = -2.0
    source_y_cm: float = 2.0
    heat_dt_ms: float = 4.0
    v_rest_mv: float = -85.0
    v_dep_mv: float = 30.0
    upstroke_eps_ms: float = 0.4

    def template(self) -> APTemplate:
        return APTemplate(self.v_rest_mv, self.v_dep_mv, self.upstroke_eps_ms)


@dataclass(frozen=True)
class TimeConfig:
    t_end_ms: float = 120.0
    dt_ms: float = 1.0


@dataclass(frozen=True)
class SolverConfig:
    method: str = "cg"
    tol: float = 1e-10
    cholesky_tol: float = 1e-10
    max_iterations: int = 0  # 0: 10 x number of vertices


@dataclass(frozen=True)
class ElectrodeSpec:
    name: str
    angle_deg: float
    radius_cm: float

    @property
    def angle_rad(self) -> float:
        return float(np.deg2rad(self.angle_deg))


@dataclass(frozen=True)
class DensityConfig:
    kinds: tuple[str, ...] = ("uniform", "gaussian")
    heat_steps: int = 20


@dataclass(frozen=True)
class MonteCarloConfig:
    n_samples: int = 100_000


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    vtk_modes: int = 5


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryParams = field(default_factory=GeometryParams)
    mesh_file: str = ""
    conductivity: ConductivityModel = field(default_factory=ConductivityModel)
    activation: ActivationConfig = field(default_factory=ActivationConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    electrodes: tuple[ElectrodeSpec, ...] = ()
    leads: tuple[tuple[str, tuple[str, ...], tuple[Fraction, ...]], ...] = ()
    densities: DensityConfig = field(default_factory=DensityConfig)
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    @classmethod
    def benchmark(cls) -> "RunConfig":
        """The idealized torso benchmark: leads II and V1, uniform and Gaussian densities."""
        electrodes = tuple(ElectrodeSpec(n, a, 1.5) for n, a in
                           (("VL", 135.0), ("VR", 45.0), ("VF", 270.0), ("V1", 180.0)))
        names = tuple(e.name for e in electrodes)
        third = Fraction(1, 3)
        leads = (("II", names, (Fraction(-1), Fraction(0), Fraction(1), Fraction(0))),
                 ("V1", names, (-third, -third, -third, Fraction(1))))
        cfg = cls(electrodes=electrodes, leads=leads)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        self.geometry.validate()
        self.conductivity.validate()
        names = [e.name for e in self.electrodes]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate electrode names")
        for e in self.electrodes:
            if e.radius_cm < 0:
                raise ConfigError(f"electrodes.{e.name}.radius_cm must be nonnegative")
        if not self.leads:
            raise ConfigError("at least one lead is required")
        for name, elec, weights in self.leads:
            for n in elec:
                if n not in names:
                    raise ConfigError(f"leads.{name}: electrode {n!r} has no entry under [electrodes]")
            self.lead_definition(name)
        for k in self.densities.kinds:
            if k not in DENSITY_KINDS:
                raise ConfigError(f"densities.kinds: unknown kind {k!r}")
        if self.densities.heat_steps < 20:
            raise ConfigError("densities.heat_steps must be at least 20")
        if self.solver.method not in SOLVER_METHODS:
            raise ConfigError(f"solver.method must be one of {SOLVER_METHODS}")
        if not (self.solver.tol > 0 and self.solver.cholesky_tol > 0):
            raise ConfigError("solver tolerances must be positive")
        if self.solver.max_iterations < 0:
            raise ConfigError("solver.max_iterations must be nonnegative")
        if self.time.dt_ms <= 0 or self.time.t_end_ms <= 0:
            raise ConfigError("time grid must be positive")
        try:
            time_grid(self.time.t_end_ms, self.time.dt_ms)
        except ValueError as exc:
            raise ConfigError(f"time: {exc}") from exc
        if self.monte_carlo.n_samples < 100:
            raise ConfigError("monte_carlo.n_samples must be at least 100")
        if self.activation.cv_long_cm_per_s <= 0 or self.activation.heat_dt_ms <= 0:
            raise ConfigError("activation speed and heat step must be positive")
        try:
            self.activation.template()
        except ValueError as exc:
            raise ConfigError(f"activation: {exc}") from exc

    def electrode(self, name: str) -> ElectrodeSpec:
        for e in self.electrodes:
            if e.name == name:
                return e
        raise ConfigError(f"unknown electrode {name!r}")

    def lead_definition(self, name: str) -> LeadDefinition:
        for lname, elec, weights in self.leads:
            if lname == name:
                try:
                    return LeadDefinition(lname, elec, weights, tuple(self.electrode(n).angle_rad for n in elec))
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown lead {name!r}")

    def lead_definitions(self) -> list[LeadDefinition]:
        return [self.lead_definition(name) for name, _, _ in self.leads]

    def with_overrides(self, out: str | None = None, seed: int | None = None) -> "RunConfig":
        cfg = self
        if out is not None:
            cfg = replace(cfg, output=replace(cfg.output, directory=str(out)))
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        return cfg

    def canonical(self) -> dict:
        """JSON-ready view with exact rational weights; independent of file formatting."""
        d = asdict(self)
        d["leads"] = [{"name": n, "electrodes": list(e), "weights": [str(w) for w in ws]}
                      for n, e, ws in self.leads]
        return d

    def checksum(self) -> str:
        """Identity of the computation; the output directory does not enter."""
        d = self.canonical()
        d["output"].pop("directory")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# TOML parsing

_SECTIONS = {
    "geometry": ("torso_semi_x_cm", "torso_semi_y_cm", "heart_center_x_cm", "heart_center_y_cm",
                 "endo_radius_cm", "epi_radius_cm"),
    "mesh": ("heart_edge_cm", "torso_edge_cm", "grading"),
    "conductivity": ("sigma_i_long_mS_per_cm", "sigma_i_trans_mS_per_cm", "sigma_e_long_mS_per_cm",
                     "sigma_e_trans_mS_per_cm", "sigma_torso_mS_per_cm", "sigma_blood_mS_per_cm"),
    "activation": ("cv_long_cm_per_s", "source_x_cm", "source_y_cm", "heat_dt_ms", "v_rest_mv",
                   "v_dep_mv", "upstroke_eps_ms"),
    "time": ("t_end_ms", "dt_ms"),
    "solver": ("method", "tol", "cholesky_tol"),
    "densities": ("kinds",),
    "monte_carlo": ("n_samples",),
    "output": ("directory",),
}
_OPTIONAL = {
    "mesh": {"file": ""},
    "solver": {"max_iterations": 0},
    "densities": {"heat_steps": 20},
    "output": {"vtk_modes": 5},
}
_ELECTRODE_KEYS = ("angle_deg", "radius_cm")
_LEAD_KEYS = ("electrodes", "weights")


def _number(path: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}: expected a finite number, got {v!r}")
    return float(v)


def _integer(path: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    return v


def _string(path: str, v) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{path}: expected a string, got {v!r}")
    return v


def _weight(path: str, v) -> Fraction:
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ConfigError(f"{path}: weights are integers or rational strings like \"-1/3\", got {v!r}")
    try:
        return Fraction(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{path}: cannot parse weight {v!r}") from exc


def parse_config(data: dict) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed TOML mapping."""
    missing: list[str] = []
    unknown: list[str] = []
    known_top = set(_SECTIONS) | {"electrodes", "leads", "seed"}
    unknown += [k for k in data if k not in known_top]
    sec: dict[str, dict] = {}
    for name, keys in _SECTIONS.items():
        table = data.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"{name}: expected a table")
        missing += [f"{name}.{k}" for k in keys if k not in table]
        allowed = set(keys) | set(_OPTIONAL.get(name, {}))
        unknown += [f"{name}.{k}" for k in table if k not in allowed]
        sec[name] = {**_OPTIONAL.get(name, {}), **table}
    if "seed" not in data:
        missing.append("seed")
    electrodes = data.get("electrodes", {})
    leads = data.get("leads", {})
    if not electrodes:
        missing.append("electrodes.<name>")
    if not leads:
        missing.append("leads.<name>")
    for en, et in electrodes.items():
        missing += [f"electrodes.{en}.{k}" for k in _ELECTRODE_KEYS if k not in et]
        unknown += [f"electrodes.{en}.{k}" for k in et if k not in _ELECTRODE_KEYS]
    for ln, lt in leads.items():
        missing += [f"leads.{ln}.{k}" for k in _LEAD_KEYS if k not in lt]
        unknown += [f"leads.{ln}.{k}" for k in lt if k not in _LEAD_KEYS]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(unknown))

    g, m = sec["geometry"], sec["mesh"]
    geometry = GeometryParams(
        torso_semi_x_cm=_number("geometry.torso_semi_x_cm", g["torso_semi_x_cm"]),
        torso_semi_y_cm=_number("geometry.torso_semi_y_cm", g["torso_semi_y_cm"]),
        heart_center_cm=(_number("geometry.heart_center_x_cm", g["heart_center_x_cm"]),
                         _number("geometry.heart_center_y_cm", g["heart_center_y_cm"])),
        endo_radius_cm=_number("geometry.endo_radius_cm", g["endo_radius_cm"]),
        epi_radius_cm=_number("geometry.epi_radius_cm", g["epi_radius_cm"]),
        heart_edge_cm=_number("mesh.heart_edge_cm", m["heart_edge_cm"]),
        torso_edge_cm=_number("mesh.torso_edge_cm", m["torso_edge_cm"]),
        grading=_number("mesh.grading", m["grading"]),
    )
    c = sec["conductivity"]
    conductivity = ConductivityModel(*(_number(f"conductivity.{k}", c[k]) for k in _SECTIONS["conductivity"]))
    a = sec["activation"]
    activation = ActivationConfig(*(_number(f"activation.{k}", a[k]) for k in _SECTIONS["activation"]))
    t = sec["time"]
    time_cfg = TimeConfig(_number("time.t_end_ms", t["t_end_ms"]), _number("time.dt_ms", t["dt_ms"]))
    s = sec["solver"]
    solver = SolverConfig(_string("solver.method", s["method"]), _number("solver.tol", s["tol"]),
                          _number("solver.cholesky_tol", s["cholesky_tol"]),
                          _integer("solver.max_iterations", s["max_iterations"]))
    d = sec["densities"]
    kinds = d["kinds"]
    if not isinstance(kinds, list) or not kinds:
        raise ConfigError("densities.kinds: expected a non-empty list")
    dens = DensityConfig(tuple(_string("densities.kinds", k) for k in kinds),
                         _integer("densities.heat_steps", d["heat_steps"]))
    mc = MonteCarloConfig(_integer("monte_carlo.n_samples", sec["monte_carlo"]["n_samples"]))
    o = sec["output"]
    output = OutputConfig(_string("output.directory", o["directory"]),
                          _integer("output.vtk_modes", o["vtk_modes"]))

    el = tuple(ElectrodeSpec(n, _number(f"electrodes.{n}.angle_deg", e["angle_deg"]),
                             _number(f"electrodes.{n}.radius_cm", e["radius_cm"]))
               for n, e in electrodes.items())
    lead_list = []
    for ln, lt in leads.items():
        names = lt["electrodes"]
        weights = lt["weights"]
        if not isinstance(names, list) or not isinstance(weights, list):
            raise ConfigError(f"leads.{ln}: electrodes and weights must be lists")
        lead_list.append((ln, tuple(_string(f"leads.{ln}.electrodes", n) for n in names),
                          tuple(_weight(f"leads.{ln}.weights", w) for w in weights)))

    cfg = RunConfig(geometry=geometry, mesh_file=_string("mesh.file", m["file"]), conductivity=conductivity,
                    activation=activation, time=time_cfg, solver=solver, electrodes=el, leads=tuple(lead_list),
                    densities=dens, monte_carlo=mc, output=output, seed=_integer("seed", data["seed"]))
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    try:
        cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_config(data)
    if cfg.mesh_file and not os.path.isabs(cfg.mesh_file):
        cfg = replace(cfg, mesh_file=os.path.join(os.path.dirname(os.path.abspath(path)), cfg.mesh_file))
    return cfg
