"""Command line entry point: ``wignerbulk <command> --config cfg.json``."""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, ExperimentConfig, load_config
from .harness import COMMANDS, RunAborted, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wignerbulk", description="Bulk eigenvalue statistics of Wigner matrices.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config (defaults apply when omitted)")
        p.add_argument("--n", type=int, help="matrix size")
        p.add_argument("--samples", type=int, help="number of Monte Carlo samples")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker processes (outputs do not depend on it)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(n=args.n, samples=args.samples, seed=args.seed, workers=args.workers, out=args.out)
        result = run_experiment(cfg, args.command)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RunAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"command": args.command, "out": str(result.out_dir), "files": sorted(result.files), "wall_time_s": round(result.wall_time, 3)}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
