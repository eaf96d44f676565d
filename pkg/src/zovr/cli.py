"""Command line entry point: ``zovr run | verify | params``."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .experiment import ConfigError, load_config, run_experiment
from .params import SELECTOR_TARGETS, SELECTORS, select_params
from .verify import SUITES, run_suite


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
        result, _ = run_experiment(cfg, output_dir=args.output_dir)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"outputs in {result.output_dir}")
    print(f"comparison budget {result.comparison_budget} queries; f0 {result.f_initial:.6g}, best f {result.f_best:.10g}")
    header = f"{'rank':>4}  {'label':<24} {'median f':>16} {'median |grad|^2':>16} {'q-to-target':>12} {'q-to-half-gap':>13}"
    print(header)
    for s in sorted(result.summaries, key=lambda s: s.rank):
        qt = "never" if math.isinf(s.median_queries_to_target) else f"{s.median_queries_to_target:.0f}"
        qh = "never" if math.isinf(s.median_queries_to_half_gap) else f"{s.median_queries_to_half_gap:.0f}"
        print(f"{s.rank:>4}  {s.label:<24} {s.median_f:>16.10f} {s.median_grad_norm_sq:>16.4e} {qt:>12} {qh:>13}")
    return 0


def _cmd_verify(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    for name in names:
        print(f"[{name}]")
        for result in run_suite(name):
            print(result.line())
            failed += not result.passed
    print(f"{failed} failed" if failed else "all checks passed")
    return 1 if failed else 0


def _cmd_params(args) -> int:
    try:
        hp = select_params(args.corollary, args.n, args.d, args.K, args.L, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"selector  {args.corollary} ({SELECTOR_TARGETS[args.corollary]})")
    for key in ("eta", "q", "K", "s1", "s2", "beta", "delta", "seed"):
        print(f"{key:<9} {getattr(hp, key)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zovr", description="Zeroth-order variance-reduced optimizers and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark config (YAML)")
    run.add_argument("config")
    run.add_argument("--output-dir", help="overrides $ZOVR_OUTPUT_DIR and the config's output_dir")
    run.add_argument("--workers", type=int, help="parallel worker processes")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify", help="run a self-check suite")
    verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    verify.set_defaults(func=_cmd_verify)

    params = sub.add_parser("params", help="print parameters prescribed by a convergence result")
    params.add_argument("corollary", choices=sorted(SELECTORS))
    params.add_argument("--n", type=int, required=True)
    params.add_argument("--d", type=int, required=True)
    params.add_argument("--K", type=int, required=True)
    params.add_argument("--L", type=float, required=True)
    params.add_argument("--seed", type=int, default=0)
    params.set_defaults(func=_cmd_params)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
