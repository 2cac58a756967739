"""Command-line entry point.

Exit status: 0 success, 1 invalid input or configuration, 2 a check failed.
"""

from __future__ import annotations

import argparse
import sys

from .config import demo_config, load_config
from .errors import ParseError, QubitQueueError, ValidationError
from .runner import run_experiment, with_overrides
from .selfcheck import run_selfcheck

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--reps", type=_positive, help="replications per cell (overrides the config)")
    p.add_argument("--paths", action="store_true", help="also write per-replication path CSVs")


class _Parser(argparse.ArgumentParser):
    # bad arguments are a validation failure, not a failed check
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qubit-queue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("config")
    _add_run_flags(run)
    check = sub.add_parser("selfcheck", help="run the algebra and reflection invariant suites")
    check.add_argument("--seed", type=_u64, default=0)
    for name in ("demo-fixed-n", "demo-varying-n"):
        _add_run_flags(sub.add_parser(name, help=f"built-in {name[5:]} convergence demo"))
    return parser


def _execute(cfg, args) -> int:
    cfg = with_overrides(cfg, seed=args.seed, reps=args.reps, out=args.out, paths=args.paths)
    report = run_experiment(cfg)
    for line in report.lines():
        print(line)
    print(f"wrote {len(report.files)} file(s) to {cfg.output_dir} in {report.timings['total']:.1f}s")
    return EXIT_OK if report.passed else EXIT_CHECK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selfcheck":
            report = run_selfcheck(args.seed)
            for line in report.lines():
                print(line)
            return EXIT_OK if report.passed else EXIT_CHECK
        if args.command == "run":
            cfg = load_config(args.config)
        else:
            cfg = demo_config(args.command[len("demo-"):])
        return _execute(cfg, args)
    except (ParseError, ValidationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except QubitQueueError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
