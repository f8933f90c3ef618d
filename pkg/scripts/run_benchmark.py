"""Run the benchmark end to end: lead-field statistics, reciprocity check, Monte-Carlo check.

Usage: python scripts/run_benchmark.py [--config configs/benchmark.toml] [--out out/benchmark]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ecguq import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "benchmark.toml"))
    p.add_argument("--out", default=None)
    p.add_argument("--skip-mc", action="store_true", help="skip the Monte-Carlo comparison")
    args = p.parse_args()
    extra = ["--config", args.config] + (["--out", args.out] if args.out else [])
    commands = ["uq", "validate"] + ([] if args.skip_mc else ["mc"])
    status = 0
    for cmd in commands:
        print(f"== {cmd}", flush=True)
        status = max(status, cli.main([cmd, *extra]))
    return status


if __name__ == "__main__":
    sys.exit(main())
