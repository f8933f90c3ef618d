"""Command-line entry point: ``python -m ecguq <command> --config run.toml``."""
from __future__ import annotations

import argparse
import sys
from contextlib import nullcontext

from .config import ConfigError, RunConfig, load_config
from . import pipeline

COMMANDS = ("mesh", "activation", "uq", "forward", "validate", "mc")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecguq", description="ECG statistics under uncertain electrode positions.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML run configuration (default: built-in benchmark)")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--seed", type=int, help="RNG seed, unsigned 64-bit (overrides seed)")
    p.add_argument("--threads", type=int, help="limit BLAS threads")
    return p


def _threads(n: int | None):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _print_checks(checks) -> bool:
    ok = True
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        ok &= c.passed
        print(f"{status} {c.name} lead={c.lead} density={c.density} value={c.value:.3e} threshold={c.threshold:.1e}")
    return ok


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig.benchmark()
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg = cfg.with_overrides(out=args.out, seed=args.seed)
    except (ConfigError, OSError) as exc:
        print(f"ecguq: stage 'config' failed: {exc}", file=sys.stderr)
        return 2
    try:
        with _threads(args.threads):
            if args.command == "mesh":
                paths = pipeline.cmd_mesh(cfg)
            elif args.command == "activation":
                paths = pipeline.cmd_activation(cfg)
            elif args.command == "uq":
                res = pipeline.run_pipeline(cfg)
                for run in res.summary["runs"]:
                    print(f"{run['lead']:>4} {run['density']:<9} rank {run['rank']}")
                paths = res.outputs
            elif args.command == "forward":
                paths = pipeline.cmd_forward(cfg)
            else:
                cmd = pipeline.cmd_validate if args.command == "validate" else pipeline.cmd_mc
                paths, checks = cmd(cfg)
                if not _print_checks(checks):
                    print(f"ecguq: stage '{args.command}' failed: checks did not pass", file=sys.stderr)
                    return 1
    except pipeline.PipelineError as exc:
        print(f"ecguq: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(paths)} files to {cfg.output.directory}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
