"""AST node definitions.

Source positions are excluded from equality so that two trees parsed from
differently formatted text compare equal when they have the same structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from typechain.errors import NOWHERE, Pos
from typechain.typesys.chains import TypeChain


def _pos():
    return field(default=NOWHERE, compare=False, kw_only=True, repr=False)


@dataclass(eq=True)
class IntLiteral:
    value: int
    pos: Pos = _pos()


@dataclass(eq=True)
class VarRef:
    name: str
    pos: Pos = _pos()

    __hash__ = object.__hash__


@dataclass(eq=True)
class FieldAccess:
    target: "Expression"
    field: str
    pos: Pos = _pos()


@dataclass(eq=True)
class Call:
    name: str
    args: list["Expression"]
    pos: Pos = _pos()


@dataclass(eq=True)
class Unary:
    op: str
    operand: "Expression"
    pos: Pos = _pos()


@dataclass(eq=True)
class Binary:
    op: str
    lhs: "Expression"
    rhs: "Expression"
    pos: Pos = _pos()


Expression = Union[IntLiteral, VarRef, FieldAccess, Call, Unary, Binary]


@dataclass(eq=True)
class VarDecl:
    names: list[str]
    chain: TypeChain
    pos: Pos = _pos()


@dataclass(eq=True)
class Assign:
    target: str
    value: Expression
    pos: Pos = _pos()

    __hash__ = object.__hash__


@dataclass(eq=True)
class If:
    cond: Expression
    then: list["Statement"]
    orelse: Optional[list["Statement"]] = None
    pos: Pos = _pos()


@dataclass(eq=True)
class Return:
    value: Optional[Expression] = None
    pos: Pos = _pos()


@dataclass(eq=True)
class ExprStmt:
    call: Call
    pos: Pos = _pos()


Statement = Union[VarDecl, Assign, If, Return, ExprStmt]


@dataclass(eq=True)
class Param:
    name: str
    chain: TypeChain
    pos: Pos = _pos()


@dataclass(eq=True)
class FunctionDecl:
    name: str
    return_type: TypeChain
    params: list[Param]
    decoration: Optional[TypeChain]
    body: list[Statement]
    pos: Pos = _pos()


@dataclass(eq=True)
class Ast:
    functions: list[FunctionDecl] = field(default_factory=list)
    top_level: list[Statement] = field(default_factory=list)

    def function(self, name: str) -> FunctionDecl | None:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None
