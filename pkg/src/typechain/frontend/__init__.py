from typechain.frontend.ast import Ast, FunctionDecl
from typechain.frontend.parser import parse_program, parse_source
from typechain.frontend.printer import format_program
from typechain.frontend.tokens import Kind, Token, tokenize

__all__ = ["Ast", "FunctionDecl", "Kind", "Token", "format_program", "parse_program",
           "parse_source", "tokenize"]
