"""Command line: ``localhardy gen-space`` and ``localhardy run``."""
from __future__ import annotations

import argparse
import json
import sys

from .harness import (CHECK_NAMES, FAMILIES, ExperimentConfig, gen_space, load_config,
                      run_check, rows_to_csv, violations, write_report, write_space)
from .mmspace import SpaceError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="localhardy", description="Finite metric measure space checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-space", help="write a space file")
    g.add_argument("--family", required=True, choices=[f for f in FAMILIES if f != "file"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scale-unit", type=float, default=1.0)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run checks and write a report")
    r.add_argument("--config", help="JSON experiment config")
    r.add_argument("--check", action="append", choices=CHECK_NAMES,
                   help="check name (repeatable)")
    r.add_argument("--space", help="space file")
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="CSV path; a .json sidecar is written next to it")
    r.add_argument("--timing", action="store_true", help="add a runtime_ms column")
    r.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-space":
            if args.n < 1:
                raise ValueError("--n must be at least 1")
            write_space(gen_space(args.family, args.n, args.seed, args.scale_unit), args.out)
            return 0
        if args.config:
            if args.check or args.space:
                raise ValueError("--config cannot be combined with --check/--space")
            cfg = load_config(args.config)
            if args.out:
                cfg.out = args.out
        else:
            if not (args.check and args.space):
                raise ValueError("run needs --config, or --check with --space")
            cfg = ExperimentConfig(seed=args.seed, family="file", trials=args.trials,
                                   checks=args.check, out=args.out, space_file=args.space,
                                   timing=args.timing, workers=args.workers)
    except (ValueError, TypeError, OSError, SpaceError, json.JSONDecodeError) as e:
        print(f"localhardy: error: {e}", file=sys.stderr)
        return 2
    try:
        rows = run_check(cfg)
    except (OSError, SpaceError) as e:
        print(f"localhardy: error: {e}", file=sys.stderr)
        return 2
    if cfg.out:
        write_report(rows, cfg, cfg.out)
    else:
        sys.stdout.write(rows_to_csv(rows, cfg.timing))
    bad = violations(rows)
    for r in bad[:20]:
        print(f"violation: {r.check} {r.instance} trial {r.trial} {r.item}: "
              f"{r.lhs!r} > {r.rhs!r}", file=sys.stderr)
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
