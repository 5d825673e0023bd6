"""Recursive-descent parser producing :mod:`typechain.frontend.ast` trees."""

from __future__ import annotations

from typechain.errors import ParseError, Pos
from typechain.frontend import ast
from typechain.frontend.tokens import Kind, Token, tokenize
from typechain.typesys.chains import TypeChain, TypeConstructor

# loosest first; each level is left-associative
BINARY_LEVELS = (("||",), ("&&",), ("==", "!=", "<", ">"), ("+", "-"), ("*", "/"))


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # token helpers

    def peek(self, offset: int = 0) -> Token | None:
        j = self.i + offset
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, lexeme: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.kind in (Kind.PUNCT, Kind.KEYWORD) and tok.lexeme == lexeme

    def here(self) -> Pos:
        tok = self.peek()
        if tok is not None:
            return tok.pos
        if self.tokens:
            last = self.tokens[-1]
            return Pos(last.line, last.column + len(last.lexeme))
        return Pos(1, 1)

    def fail(self, expected: str):
        tok = self.peek()
        found = f"'{tok.lexeme}'" if tok else "end of input"
        raise ParseError(f"expected {expected}, found {found}", self.here())

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, lexeme: str) -> Token:
        if not self.at(lexeme):
            self.fail(f"'{lexeme}'")
        return self.advance()

    def accept(self, lexeme: str) -> bool:
        if self.at(lexeme):
            self.i += 1
            return True
        return False

    def ident(self) -> Token:
        tok = self.peek()
        if tok is None or tok.kind is not Kind.IDENT:
            self.fail("identifier")
        return self.advance()

    # program structure

    def program(self) -> ast.Ast:
        prog = ast.Ast()
        while self.peek() is not None:
            if self.at("function"):
                prog.functions.append(self.function())
            else:
                prog.top_level.append(self.statement())
        return prog

    def function(self) -> ast.FunctionDecl:
        pos = self.expect("function").pos
        ret = self.chain()
        name = self.ident().lexeme
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.param())
            while self.accept(","):
                params.append(self.param())
        self.expect(")")
        decoration = self.chain() if self.accept(":") else None
        body = self.block()
        return ast.FunctionDecl(name, ret, params, decoration, body, pos=pos)

    def param(self) -> ast.Param:
        self.expect("var")
        tok = self.ident()
        self.expect(":")
        return ast.Param(tok.lexeme, self.chain(), pos=tok.pos)

    def chain(self) -> TypeChain:
        entries = [self.constructor()]
        while self.accept("::"):
            entries.append(self.constructor())
        return TypeChain(tuple(entries))

    def constructor(self) -> TypeConstructor:
        tok = self.ident()
        args: list[TypeConstructor | int] = []
        if self.accept("["):
            args.append(self.type_arg())
            while self.accept(","):
                args.append(self.type_arg())
            self.expect("]")
        return TypeConstructor(tok.lexeme, tuple(args), pos=tok.pos)

    def type_arg(self) -> TypeConstructor | int:
        tok = self.peek()
        if tok is not None and tok.kind is Kind.INT:
            self.advance()
            return int(tok.lexeme)
        if tok is None or tok.kind is not Kind.IDENT:
            self.fail("type or integer")
        return self.constructor()

    def block(self) -> list[ast.Statement]:
        self.expect("{")
        body = []
        while not self.at("}"):
            if self.peek() is None:
                self.fail("'}'")
            body.append(self.statement())
        self.expect("}")
        return body

    def body(self) -> list[ast.Statement]:
        if self.at("{"):
            return self.block()
        return [self.statement()]

    # statements

    def statement(self) -> ast.Statement:
        tok = self.peek()
        if self.at("var"):
            self.advance()
            names = [self.ident()]
            while self.accept(","):
                names.append(self.ident())
            self.expect(":")
            type_chain = self.chain()
            self.expect(";")
            return ast.VarDecl([n.lexeme for n in names], type_chain, pos=names[0].pos)
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then = self.body()
            orelse = self.body() if self.accept("else") else None
            return ast.If(cond, then, orelse, pos=tok.pos)
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.expression()
            self.expect(";")
            return ast.Return(value, pos=tok.pos)
        if tok is not None and tok.kind is Kind.IDENT and self.at(":=", 1):
            self.i += 2
            value = self.expression()
            self.expect(";")
            return ast.Assign(tok.lexeme, value, pos=tok.pos)
        if tok is None or tok.kind is not Kind.IDENT:
            self.fail("statement")
        expr = self.expression()
        if not isinstance(expr, ast.Call):
            raise ParseError("expected assignment or call statement", tok.pos)
        self.expect(";")
        return ast.ExprStmt(expr, pos=tok.pos)

    # expressions

    def expression(self, level: int = 0) -> ast.Expression:
        if level == len(BINARY_LEVELS):
            return self.unary()
        lhs = self.expression(level + 1)
        ops = BINARY_LEVELS[level]
        while True:
            tok = self.peek()
            if tok is None or tok.kind is not Kind.PUNCT or tok.lexeme not in ops:
                return lhs
            self.advance()
            rhs = self.expression(level + 1)
            lhs = ast.Binary(tok.lexeme, lhs, rhs, pos=tok.pos)

    def unary(self) -> ast.Expression:
        if self.at("-"):
            tok = self.advance()
            return ast.Unary("-", self.unary(), pos=tok.pos)
        return self.postfix()

    def postfix(self) -> ast.Expression:
        expr = self.primary()
        while self.at("."):
            dot = self.advance()
            name = self.ident()
            expr = ast.FieldAccess(expr, name.lexeme, pos=dot.pos)
        return expr

    def primary(self) -> ast.Expression:
        tok = self.peek()
        if tok is None:
            self.fail("expression")
        if tok.kind is Kind.INT:
            self.advance()
            return ast.IntLiteral(int(tok.lexeme), pos=tok.pos)
        if tok.kind is Kind.IDENT:
            self.advance()
            if self.accept("("):
                args = []
                if not self.at(")"):
                    args.append(self.expression())
                    while self.accept(","):
                        args.append(self.expression())
                self.expect(")")
                return ast.Call(tok.lexeme, args, pos=tok.pos)
            return ast.VarRef(tok.lexeme, pos=tok.pos)
        if self.accept("("):
            expr = self.expression()
            self.expect(")")
            return expr
        self.fail("expression")


def parse_program(tokens: list[Token]) -> ast.Ast:
    """Parse a token sequence; the first syntax error aborts with :class:`ParseError`."""
    return Parser(tokens).program()


def parse_source(source: str) -> ast.Ast:
    return parse_program(tokenize(source))
