"""Pretty-printer emitting source that re-parses to an equal AST."""

from __future__ import annotations

from typechain.frontend import ast
from typechain.frontend.parser import BINARY_LEVELS

_LEVEL = {op: i for i, ops in enumerate(BINARY_LEVELS) for op in ops}
_UNARY_LEVEL = len(BINARY_LEVELS)


def format_expr(expr: ast.Expression, level: int = 0) -> str:
    if isinstance(expr, ast.IntLiteral):
        # negative literals only arise from constructed trees
        return str(expr.value) if expr.value >= 0 else f"({expr.value})"
    if isinstance(expr, ast.VarRef):
        return expr.name
    if isinstance(expr, ast.Call):
        return f"{expr.name}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, ast.FieldAccess):
        inner = format_expr(expr.target, _UNARY_LEVEL + 1)
        return f"{inner}.{expr.field}"
    if isinstance(expr, ast.Unary):
        text = f"{expr.op}{format_expr(expr.operand, _UNARY_LEVEL)}"
        return text if level <= _UNARY_LEVEL else f"({text})"
    if isinstance(expr, ast.Binary):
        mine = _LEVEL[expr.op]
        # left-assoc: the right operand needs parens at the same level
        text = f"{format_expr(expr.lhs, mine)} {expr.op} {format_expr(expr.rhs, mine + 1)}"
        return text if level <= mine else f"({text})"
    raise TypeError(f"not an expression: {expr!r}")


def _format_block(stmts: list[ast.Statement], indent: int) -> list[str]:
    lines = []
    for stmt in stmts:
        lines.extend(format_stmt(stmt, indent))
    return lines


def format_stmt(stmt: ast.Statement, indent: int = 0) -> list[str]:
    pad = "    " * indent
    if isinstance(stmt, ast.VarDecl):
        return [f"{pad}var {', '.join(stmt.names)} : {stmt.chain};"]
    if isinstance(stmt, ast.Assign):
        return [f"{pad}{stmt.target} := {format_expr(stmt.value)};"]
    if isinstance(stmt, ast.Return):
        if stmt.value is None:
            return [f"{pad}return;"]
        return [f"{pad}return {format_expr(stmt.value)};"]
    if isinstance(stmt, ast.ExprStmt):
        return [f"{pad}{format_expr(stmt.call)};"]
    if isinstance(stmt, ast.If):
        lines = [f"{pad}if ({format_expr(stmt.cond)}) {{"]
        lines += _format_block(stmt.then, indent + 1)
        if stmt.orelse is not None:
            lines.append(f"{pad}}} else {{")
            lines += _format_block(stmt.orelse, indent + 1)
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"not a statement: {stmt!r}")


def format_function(fn: ast.FunctionDecl) -> list[str]:
    params = ", ".join(f"var {p.name} : {p.chain}" for p in fn.params)
    head = f"function {fn.return_type} {fn.name}({params})"
    if fn.decoration is not None:
        head += f" : {fn.decoration}"
    return [head + " {", *_format_block(fn.body, 1), "}"]


def format_program(program: ast.Ast) -> str:
    lines: list[str] = []
    for fn in program.functions:
        lines.extend(format_function(fn))
        lines.append("")
    lines.extend(_format_block(program.top_level, 0))
    return "\n".join(lines) + "\n"
