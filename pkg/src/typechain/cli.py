"""Command-line driver: ``typechain run FILE [options]``.

Exit codes: 0 success, 1 runtime error, 2 lexical/syntax/static-check
failure, 64 bad flags, 66 unreadable input file.
"""

from __future__ import annotations

import argparse
import os
import sys

from typechain.distsim import write_trace
from typechain.errors import ConfigError, LexError, ParseError
from typechain.frontend import parse_source
from typechain.interp import run_program
from typechain.typesys import check_program

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_COMPILE = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66

THREADS_ENV = "TYPECHAIN_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonnegative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return _positive(env)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{THREADS_ENV}: {exc}") from None
    return max(1, os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="typechain", description="Run programs whose type chains drive parallelism.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="check and run a program")
    run.add_argument("file")
    run.add_argument("--procs", type=_positive, default=1, help="number of virtual processes")
    run.add_argument("--threads", type=_positive, default=None,
                     help=f"task workers per process (default ${THREADS_ENV} or CPU count)")
    run.add_argument("--seed", type=_nonnegative, default=0, help="scheduling perturbation seed")
    run.add_argument("--trace", metavar="PATH", help="write communication trace as JSON lines")
    run.add_argument("--dag", metavar="PATH", help="write task DAG in DOT format")
    run.add_argument("--unchecked", action="store_true", help="wrap on 64-bit overflow")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        threads = args.threads if args.threads is not None else default_threads()
    except UsageError as exc:
        print(f"typechain: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run_file(args.file, args.procs, threads, args.seed, args.trace, args.dag,
                    checked=not args.unchecked)


def run_file(path, procs=1, threads=1, seed=0, trace_path=None, dag_path=None, checked=True) -> int:
    try:
        with open(path, encoding="utf-8") as fh:
            source = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        print(f"typechain: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_NOINPUT

    try:
        program = parse_source(source)
    except (LexError, ParseError) as exc:
        print(exc.diagnostic().format(path), file=sys.stderr)
        return EXIT_COMPILE
    diagnostics = check_program(program)
    if diagnostics:
        for diag in diagnostics:
            print(diag.format(path), file=sys.stderr)
        return EXIT_COMPILE

    try:
        outcome = run_program(program, procs=procs, workers=threads, seed=seed, checked=checked)
    except ConfigError as exc:
        print(f"{path}: error: {exc.message}", file=sys.stderr)
        return EXIT_RUNTIME

    for line in outcome.output:
        print(line)
    if trace_path:
        write_trace(trace_path, outcome.trace)
    if outcome.error is not None:
        err = outcome.error
        print(f"{path}:{err.pos.line}:{err.pos.column}: error: [rank {err.rank}] {err.code}: "
              f"{err.message}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in outcome.snapshot_lines():
        print(line)
    if dag_path:
        with open(dag_path, "w", encoding="utf-8") as fh:
            fh.write(outcome.dag_dot())
    sys.stdout.flush()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
