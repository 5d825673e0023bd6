"""Lexer for the mini language."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from typechain.errors import LexError, Pos


class Kind(enum.Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    INT = "integer-literal"
    PUNCT = "punctuation"


KEYWORDS = frozenset({"var", "function", "if", "else", "return"})

# longest first so `::`, `:=` win over `:`
PUNCTUATION = (
    ":=", "::", "==", "!=", "||", "&&",
    ":", ";", ",", "(", ")", "[", "]", "{", "}", ".", "+", "-", "*", "/", "<", ">",
)

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class Token:
    kind: Kind
    lexeme: str
    line: int
    column: int

    @property
    def pos(self) -> Pos:
        return Pos(self.line, self.column)

    def __repr__(self) -> str:
        return f"Token({self.kind.name}, {self.lexeme!r}, {self.line}:{self.column})"


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, skipping whitespace and ``//`` comments."""
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            lexeme = source[i:j]
            if int(lexeme) > INT64_MAX:
                raise LexError(f"integer literal {lexeme} does not fit in 64 bits", Pos(line, start_col))
            tokens.append(Token(Kind.INT, lexeme, line, start_col))
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            lexeme = source[i:j]
            kind = Kind.KEYWORD if lexeme in KEYWORDS else Kind.IDENT
            tokens.append(Token(kind, lexeme, line, start_col))
        else:
            for punct in PUNCTUATION:
                if source.startswith(punct, i):
                    lexeme = punct
                    break
            else:
                raise LexError(f"unexpected character {ch!r}", Pos(line, start_col))
            tokens.append(Token(Kind.PUNCT, lexeme, line, start_col))
        col += len(lexeme)
        i += len(lexeme)
    return tokens
