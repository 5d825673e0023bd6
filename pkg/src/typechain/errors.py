"""Error and diagnostic types shared across the toolchain."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Pos:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


NOWHERE = Pos(0, 0)


@dataclass(frozen=True)
class Diagnostic:
    pos: Pos
    message: str

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.pos.line}:{self.pos.column}: error: {self.message}"


class TypechainError(Exception):
    """Base class for every error raised by the toolchain."""

    def __init__(self, message: str, pos: Pos = NOWHERE):
        super().__init__(message)
        self.message = message
        self.pos = pos

    def diagnostic(self) -> Diagnostic:
        return Diagnostic(self.pos, self.message)


class LexError(TypechainError):
    pass


class ParseError(TypechainError):
    pass


class ChainError(TypechainError):
    """A type chain uses an unknown constructor or malformed arguments."""


class CheckError(TypechainError):
    """Raised when static checking found problems; carries all diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        first = diagnostics[0]
        super().__init__(first.message, first.pos)
        self.diagnostics = diagnostics


class RuntimeFault(TypechainError):
    """A runtime error in evaluated code.

    ``code`` is a stable identifier such as ``E_FUTURE_NOT_READY``.
    """

    def __init__(self, code: str, message: str, pos: Pos = NOWHERE, rank: int | None = None):
        super().__init__(message, pos)
        self.code = code
        self.rank = rank

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ConfigError(TypechainError):
    """Invalid world/runtime configuration (e.g. owner rank out of range)."""


class RuntimeStateError(TypechainError):
    """Misuse of the task runtime (spawn after shutdown, deadlock)."""
