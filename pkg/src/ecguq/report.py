"""Summary tables of the reported scalars, as plain CSV.

``summary.csv`` columns:

lead, density
    run labels.
max_abs_mean_gap
    ``max_t |E[V](t) - V_det(t)|`` in mV.
max_std
    ``max_t sqrt(max(Var[V](t), 0))`` in mV.
rank
    number of low-rank correlation modes.
reciprocity_max_abs_err
    ``max_t`` of the lead-field versus forward-solve difference in mV; empty
    when no forward solve was run.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .ecg import EcgStatistics

SUMMARY_COLUMNS = ["lead", "density", "max_abs_mean_gap", "max_std", "rank", "reciprocity_max_abs_err"]


class ReportError(ValueError):
    pass


def _row(lead: str, density: str, v_det, mean, var, rank, reciprocity) -> dict:
    return {
        "lead": lead,
        "density": density,
        "max_abs_mean_gap": float(np.max(np.abs(np.asarray(mean) - np.asarray(v_det)))),
        "max_std": float(np.max(np.sqrt(np.maximum(var, 0.0)))),
        "rank": int(rank),
        "reciprocity_max_abs_err": "" if reciprocity is None else float(reciprocity),
    }


def summarize(statistics: Mapping[tuple[str, str], EcgStatistics],
              reciprocity: Mapping[str, float] | None = None) -> list[dict]:
    """One row per (lead, density) run, in input order."""
    rows = []
    for (lead, density), st in statistics.items():
        if st is None:
            raise ReportError(f"missing statistics for {lead}/{density}")
        rec = None if reciprocity is None else reciprocity.get(lead)
        rows.append(_row(lead, density, st.deterministic, st.mean, st.variance, st.rank, rec))
    return rows


def write_summary(path: str | Path, rows: list[dict]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return path


def read_summary(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize_outputs(out_dir: str | Path) -> list[dict]:
    """Recompute the summary rows from ``ecg_<lead>_<density>.csv`` and ``run_summary.json``."""
    out = Path(out_dir)
    info = out / "run_summary.json"
    if not info.exists():
        raise ReportError(f"{info} not found")
    runs = json.loads(info.read_text())["runs"]
    rows = []
    for run in runs:
        path = out / f"ecg_{run['lead']}_{run['density']}.csv"
        if not path.exists():
            raise ReportError(f"{path} not found")
        data = np.genfromtxt(path, delimiter=",", names=True)
        rows.append(_row(run["lead"], run["density"], data["V_det"], data["E"], data["Var"], run["rank"], None))
    return rows


def timing_comparison(leadfield_s: float, forward_s: float, n_runs: int) -> dict:
    """Informational wall-clock comparison; hardware dependent and never asserted."""
    return {
        "leadfield_total_s": leadfield_s,
        "forward_solve_s": forward_s,
        "runs": n_runs,
        "forward_over_leadfield_per_run": forward_s / max(leadfield_s / max(n_runs, 1), 1e-300),
    }
