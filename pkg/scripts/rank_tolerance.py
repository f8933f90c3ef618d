"""Pivoted-Cholesky rank of the correlation matrix versus truncation tolerance and heat steps.

Usage: python scripts/rank_tolerance.py [--config configs/benchmark.toml]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from ecguq.assembly import assemble_correlation
from ecguq.config import load_config
from ecguq.density import JointDensityModel, make_density
from ecguq.lowrank import pivoted_cholesky
from ecguq.pipeline import setup

ROOT = Path(__file__).resolve().parents[1]
TOLS = (1e-6, 1e-8, 1e-10, 1e-12)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "benchmark.toml"))
    args = p.parse_args()
    cfg = load_config(args.config)
    prob = setup(cfg, with_activation=False)
    print("lead density heat_steps " + " ".join(f"tol={t:.0e}" for t in TOLS))
    for lead in cfg.lead_definitions():
        for kind, steps in (("uniform", None), ("gaussian", 20), ("gaussian", 80), ("gaussian", 320)):
            kw = {} if steps is None else {"n_steps": steps}
            dens = JointDensityModel([make_density(prob.mesh, kind, prob.anchors[n], cfg.electrode(n).radius_cm, **kw)
                                      for n in lead.electrodes])
            R = assemble_correlation(prob.mesh, dens, lead.a).matrix
            ranks = [pivoted_cholesky(R, t).rank for t in TOLS]
            print(f"{lead.name:>4} {kind:<8} {steps or '-':>5} " + " ".join(f"{r:>9}" for r in ranks))


if __name__ == "__main__":
    main()
