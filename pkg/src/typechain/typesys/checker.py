"""Best-effort static checks over a parsed program."""

from __future__ import annotations

from dataclasses import dataclass

from typechain.errors import ChainError, Diagnostic, Pos
from typechain.frontend import ast
from typechain.typesys.chains import (
    REGISTRY,
    BaseKind,
    EffectiveAttributes,
    Everywhere,
    RMA,
    Role,
    TypeChain,
    resolve_chain,
)

INT = "Int"
FUTURE = "Future"

BUILTINS = {"synchronise": 1, "print": 1}


@dataclass
class Signature:
    decl: ast.FunctionDecl
    attrs: EffectiveAttributes

    @property
    def arity(self) -> int:
        return len(self.decl.params)


class _Checker:
    def __init__(self, program: ast.Ast):
        self.program = program
        self.diags: list[Diagnostic] = []
        self.signatures: dict[str, Signature] = {}

    def error(self, pos: Pos, message: str) -> None:
        self.diags.append(Diagnostic(pos, message))

    # chains

    def _resolve(self, type_chain: TypeChain) -> EffectiveAttributes | None:
        try:
            return resolve_chain(type_chain)
        except ChainError as exc:
            self.error(exc.pos, exc.message)
            return None

    def variable_chain(self, type_chain: TypeChain, top_level: bool) -> str | None:
        """Validate the chain of a variable or parameter; return its value kind."""
        attrs = self._resolve(type_chain)
        if attrs is None:
            return None
        ok = True
        for i, entry in enumerate(type_chain.entries):
            role = REGISTRY[entry.name].role
            if role is Role.BASE and i > 0:
                self.error(entry.pos, f"base type '{entry}' must be the leftmost entry of a variable chain")
                ok = False
            elif role is Role.FUNCTION:
                self.error(entry.pos, f"'{entry.name}' applies only to function declarations")
                ok = False
            elif role is Role.DATA and not top_level:
                self.error(entry.pos, f"'{entry.name}' applies only to top-level variables")
                ok = False
        if REGISTRY[type_chain.entries[0].name].role is not Role.BASE:
            self.error(type_chain.pos, "a variable chain must start with Int or Future[Int]")
            return None
        if attrs.base_kind is BaseKind.FUTURE_INT:
            if attrs.allocation != Everywhere() or attrs.mechanism != RMA():
                self.error(type_chain.pos, "futures cannot be distributed across processes")
                ok = False
            return FUTURE if ok else None
        return INT if ok else None

    def decoration_chain(self, type_chain: TypeChain) -> EffectiveAttributes:
        attrs = self._resolve(type_chain)
        for entry in type_chain.entries:
            spec = REGISTRY.get(entry.name)
            if spec is not None and spec.role is not Role.FUNCTION:
                self.error(entry.pos, f"'{entry.name}' cannot decorate a function")
        return attrs or EffectiveAttributes()

    # program

    def run(self) -> list[Diagnostic]:
        for fn in self.program.functions:
            if fn.name in self.signatures:
                self.error(fn.pos, f"duplicate function '{fn.name}'")
                continue
            if fn.name in BUILTINS:
                self.error(fn.pos, f"'{fn.name}' is a built-in function")
                continue
            attrs = self.decoration_chain(fn.decoration) if fn.decoration else EffectiveAttributes()
            self.signatures[fn.name] = Signature(fn, attrs)
        for fn in self.program.functions:
            self.function(fn)
        scope: dict[str, str | None] = {}
        self.block(self.program.top_level, scope, None)
        return self.diags

    def function(self, fn: ast.FunctionDecl) -> None:
        ret = self._resolve(fn.return_type)
        if ret is not None and (len(fn.return_type) != 1 or ret.base_kind is not BaseKind.INT):
            self.error(fn.return_type.pos, f"function '{fn.name}' must return Int")
        scope: dict[str, str | None] = {}
        for param in fn.params:
            if param.name in scope:
                self.error(param.pos, f"duplicate parameter '{param.name}'")
            kind = self.variable_chain(param.chain, top_level=False)
            if kind == FUTURE:
                self.error(param.pos, "parameters must be Int; use dependencies to accept futures")
            scope[param.name] = INT
        sig = self.signatures.get(fn.name)
        if sig is not None and sig.decl is fn:
            self.block(fn.body, scope, sig)

    def block(self, stmts, scope, fn: Signature | None) -> None:
        for stmt in stmts:
            self.statement(stmt, scope, fn)

    def statement(self, stmt: ast.Statement, scope, fn: Signature | None) -> None:
        if isinstance(stmt, ast.VarDecl):
            kind = self.variable_chain(stmt.chain, top_level=fn is None)
            for name in stmt.names:
                if name in scope:
                    self.error(stmt.pos, f"variable '{name}' already declared")
                scope[name] = kind
        elif isinstance(stmt, ast.Assign):
            self.assignment(stmt, scope)
        elif isinstance(stmt, ast.If):
            self.expect_int(stmt.cond, scope, "condition")
            self.block(stmt.then, scope, fn)
            if stmt.orelse is not None:
                self.block(stmt.orelse, scope, fn)
        elif isinstance(stmt, ast.Return):
            if fn is None:
                self.error(stmt.pos, "return outside of a function")
                return
            if stmt.value is None:
                self.error(stmt.pos, f"return in '{fn.decl.name}' needs an Int value")
                return
            kind = self.expr(stmt.value, scope)
            if kind == FUTURE and not fn.attrs.spawnable:
                self.error(stmt.value.pos, f"'{fn.decl.name}' returns a Future but is not spawnable")
        elif isinstance(stmt, ast.ExprStmt):
            kind = self.expr(stmt.call, scope)
            if kind == FUTURE:
                self.error(stmt.pos, f"spawnable call result of '{stmt.call.name}' is discarded")

    def assignment(self, stmt: ast.Assign, scope) -> None:
        if stmt.target not in scope:
            self.error(stmt.pos, f"assignment to undeclared variable '{stmt.target}'")
            self.expr(stmt.value, scope)
            return
        target = scope[stmt.target]
        kind = self.expr(stmt.value, scope)
        if target is None or kind is None:
            return
        if target == INT and kind == FUTURE:
            if self._is_spawnable_call(stmt.value):
                self.error(stmt.value.pos, f"spawnable call result bound to non-Future variable '{stmt.target}'")
            else:
                self.error(stmt.value.pos, f"Future value assigned to Int variable '{stmt.target}'")
        elif target == FUTURE and kind == INT:
            self.error(stmt.value.pos, f"Int value assigned to Future variable '{stmt.target}'")

    def _is_spawnable_call(self, expr) -> bool:
        if not isinstance(expr, ast.Call):
            return False
        sig = self.signatures.get(expr.name)
        return sig is not None and sig.attrs.spawnable

    # expressions

    def expect_int(self, expr, scope, what: str) -> None:
        kind = self.expr(expr, scope)
        if kind == FUTURE:
            if self._is_spawnable_call(expr):
                self.error(expr.pos, f"spawnable call result used as Int in {what}")
            else:
                self.error(expr.pos, f"Future used as Int in {what}; synchronise it and read .val")

    def expr(self, expr: ast.Expression, scope) -> str | None:
        if isinstance(expr, ast.IntLiteral):
            return INT
        if isinstance(expr, ast.VarRef):
            if expr.name not in scope:
                self.error(expr.pos, f"undeclared variable '{expr.name}'")
                return None
            return scope[expr.name]
        if isinstance(expr, ast.FieldAccess):
            kind = self.expr(expr.target, scope)
            if expr.field != "val":
                self.error(expr.pos, f"unknown field '{expr.field}'")
            elif kind == INT:
                self.error(expr.pos, "'.val' applies only to Future values")
            return INT
        if isinstance(expr, ast.Unary):
            self.expect_int(expr.operand, scope, f"operand of '{expr.op}'")
            return INT
        if isinstance(expr, ast.Binary):
            self.expect_int(expr.lhs, scope, f"operand of '{expr.op}'")
            self.expect_int(expr.rhs, scope, f"operand of '{expr.op}'")
            return INT
        if isinstance(expr, ast.Call):
            return self.call(expr, scope)
        raise TypeError(f"not an expression: {expr!r}")

    def call(self, call: ast.Call, scope) -> str | None:
        if call.name in BUILTINS:
            if len(call.args) != BUILTINS[call.name]:
                self.error(call.pos, f"'{call.name}' takes {BUILTINS[call.name]} argument, got {len(call.args)}")
            for arg in call.args:
                if call.name == "synchronise":
                    self.expr(arg, scope)
                else:
                    self.expect_int(arg, scope, f"argument of '{call.name}'")
            return INT
        sig = self.signatures.get(call.name)
        if sig is None:
            self.error(call.pos, f"call to undefined function '{call.name}'")
            for arg in call.args:
                self.expr(arg, scope)
            return None
        if len(call.args) != sig.arity:
            self.error(call.pos, f"'{call.name}' takes {sig.arity} arguments, got {len(call.args)}")
        for arg in call.args:
            if sig.attrs.dependencies:
                self.expr(arg, scope)
            else:
                kind = self.expr(arg, scope)
                if kind == FUTURE:
                    self.error(arg.pos, f"Future passed to '{call.name}', which does not declare dependencies")
        return FUTURE if sig.attrs.spawnable else INT


def check_program(program: ast.Ast) -> list[Diagnostic]:
    """Return every static diagnostic for ``program``; empty means it checks."""
    return _Checker(program).run()
