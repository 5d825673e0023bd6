"""Interpreter and runtime for a mini language whose type chains drive parallelism."""

from typechain.frontend import format_program, parse_program, parse_source, tokenize
from typechain.interp import RunOutcome, run_program
from typechain.typesys import check_program, resolve_chain

__all__ = ["RunOutcome", "check_program", "format_program", "parse_program", "parse_source",
           "resolve_chain", "run_program", "tokenize"]
