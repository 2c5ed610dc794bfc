"""Command-line entry point for the batch experiments."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, dump_config, load_config, validate
from .experiments import EXPERIMENTS, SYSTEMS, WORKERS_ENV, ExperimentError, failures, run_experiment
from .results import emit

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="risec",
        description="Run RIS-aided secure radar-communication Monte Carlo experiments.",
        epilog=f"Set {WORKERS_ENV}=<n> to cap the number of parallel trial workers. "
               "Exit status: 0 success, 1 output not writable, 2 configuration error, "
               "3 solver failure in some trial.",
    )
    p.add_argument("--config", help="TOML scenario file; omitted keys take the defaults")
    p.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    p.add_argument("--system", choices=SYSTEMS + ("all",), default="all")
    p.add_argument("--trials", type=_positive, help="override the number of trials")
    p.add_argument("--seed", type=_u64, help="override the base seed")
    p.add_argument("--out", default="-", help="output path, '-' for stdout (default)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 so repeated runs are byte-identical")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved configuration as canonical TOML and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        over = {}
        if args.trials is not None:
            over["trials"] = args.trials
        if args.seed is not None:
            over["seed"] = args.seed
        if over:
            cfg = cfg.with_overrides(**over)
        validate(cfg)
        if args.print_config:
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        rows = run_experiment(cfg, args.experiment, args.system)
    except (ConfigError, ExperimentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        emit(rows, args.format, args.out, timing=not args.no_timing)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    bad = failures(rows)
    if bad:
        for r in bad[:5]:
            print(f"solver failure: {r.experiment} {r.algorithm} param={r.param} trial={r.trial}: {r.error}",
                  file=sys.stderr)
        if len(bad) > 5:
            print(f"... {len(bad) - 5} more", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
