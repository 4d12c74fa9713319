"""Command-line entry point.

Subcommands: run, baseline, oracle, report, inspect-snapshot.  Exit codes
partition failure classes: 2 config error, 3 data error, 4 numeric
divergence, 5 oracle failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .data import DataFormatError
from .model import ConfigError
from .pipeline import run_growth_pipeline, run_imp_c, run_static_baseline
from .report import write_summary, ReportError
from .snapshot import read_snapshot, SnapshotError
from .train import DivergenceError
from .verify import run_all

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
EXIT_ORACLE = 5


def _output_root():
    return os.environ.get("PATHGROW_OUTPUT_ROOT", "runs")


def _run_dir(cfg, tag, seed):
    return os.path.join(_output_root(), f"{tag}-{cfg.arch}-seed{seed}")


def cmd_run(args):
    cfg = load_config(args.config)
    seeds = args.seeds if args.seeds else [args.seed if args.seed is not None
                                           else cfg.seed]
    for seed in seeds:
        cfg.seed = seed
        out_dir = args.out or _run_dir(cfg, cfg.growth_method, seed)
        if args.seeds and not args.out:
            pass
        elif args.seeds and args.out:
            out_dir = os.path.join(args.out, f"seed{seed}")
        report = run_growth_pipeline(cfg, out_dir)
        print(json.dumps(report, sort_keys=True))
    return 0


def cmd_baseline(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or _run_dir(cfg, args.method, cfg.seed)
    if args.method == "imp-c":
        report = run_imp_c(cfg, out_dir, target_density=args.density)
    elif args.method in ("rg", "gg", "pwmp"):
        cfg.growth_method = args.method
        report = run_growth_pipeline(cfg, out_dir)
    elif args.method == "phew-static":
        report = run_static_baseline(cfg, out_dir, density=args.density,
                                     match_flops=args.match_flops)
    else:
        raise ConfigError(f"unknown baseline method {args.method!r}")
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_oracle(args):
    results = run_all(perturb=args.perturb)
    failures = [r for r in results if not r[1]]
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump([{"suite": n, "passed": p, "detail": d}
                       for n, p, d in results], fh, indent=2)
    if failures:
        print(f"{len(failures)} oracle suite(s) failed", file=sys.stderr)
        return EXIT_ORACLE
    return 0


def cmd_report(args):
    out = args.out or "summary.csv"
    table = write_summary(args.run_dirs, out, topology_out=args.topology_out)
    for row in table:
        print(row)
    return 0


def cmd_inspect_snapshot(args):
    arch_id, entries = read_snapshot(args.path)
    print(f"arch: {arch_id}")
    for name, (data, mask) in entries.items():
        line = f"  {name}: shape={list(data.shape)} dtype={data.dtype}"
        if mask is not None:
            line += f" nnz={int(mask.sum())}/{mask.size}"
        print(line)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pathgrow",
        description="Grow sparse networks along high-magnitude paths and "
                    "discover their operating density.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the iterative growth pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, nargs="+",
                   help="run multiple seeds sequentially")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="run a baseline method")
    p.add_argument("--config", required=True)
    p.add_argument("--method", required=True,
                   choices=["imp-c", "rg", "gg", "pwmp", "phew-static"])
    p.add_argument("--density", type=float, default=0.1,
                   help="target density (imp-c) or static density")
    p.add_argument("--match-flops", type=float,
                   help="FLOPs budget to match (phew-static)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("oracle", help="run brute-force equivalence suites")
    p.add_argument("--perturb", type=float, default=0.0,
                   help="inject a score perturbation (negative control)")
    p.add_argument("--json-out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="aggregate run directories")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--topology-out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("inspect-snapshot", help="print a snapshot's contents")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect_snapshot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, SnapshotError, ReportError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
