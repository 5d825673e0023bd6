"""Type constructors, type chains and their resolution into flat attributes.

A chain is folded left to right over a table of registered constructors;
each constructor overwrites the attributes it controls, so the rightmost
entry wins whenever two entries disagree.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Union

from typechain.errors import NOWHERE, ChainError, Pos


@dataclass(frozen=True)
class TypeConstructor:
    name: str
    args: tuple[Union["TypeConstructor", int], ...] = ()
    pos: Pos = field(default=NOWHERE, compare=False, kw_only=True)

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}[{','.join(str(a) for a in self.args)}]"


@dataclass(frozen=True)
class TypeChain:
    entries: tuple[TypeConstructor, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("a type chain needs at least one entry")

    @property
    def pos(self) -> Pos:
        return self.entries[0].pos

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __str__(self) -> str:
        return " :: ".join(str(e) for e in self.entries)


def chain(*entries: TypeConstructor | str) -> TypeChain:
    """Convenience builder: ``chain("Int", allocated_on(0))``."""
    return TypeChain(tuple(TypeConstructor(e) if isinstance(e, str) else e for e in entries))


class BaseKind(enum.Enum):
    INT = "Int"
    FUTURE_INT = "Future[Int]"


@dataclass(frozen=True)
class Everywhere:
    def __str__(self) -> str:
        return "everywhere"


@dataclass(frozen=True)
class Single:
    rank: int

    def __str__(self) -> str:
        return f"single(on {self.rank})"


@dataclass(frozen=True)
class RMA:
    def __str__(self) -> str:
        return "rma"


@dataclass(frozen=True)
class Channel:
    """Point-to-point mechanism between two ranks; symmetric."""

    low: int
    high: int

    def __init__(self, a: int, b: int):
        object.__setattr__(self, "low", min(a, b))
        object.__setattr__(self, "high", max(a, b))

    def covers(self, src: int, dst: int) -> bool:
        return {src, dst} == {self.low, self.high}

    def __str__(self) -> str:
        return f"channel({self.low},{self.high})"


Allocation = Union[Everywhere, Single]
Mechanism = Union[RMA, Channel]


@dataclass(frozen=True)
class EffectiveAttributes:
    base_kind: BaseKind | None = None
    allocation: Allocation = Everywhere()
    mechanism: Mechanism = RMA()
    spawnable: bool = False
    dependencies: bool = False


class Role(enum.Enum):
    BASE = "base"            # Int, Future[...]
    DATA = "data"            # allocation / communication of variables
    FUNCTION = "function"    # call behaviour of functions
    NESTED = "nested"        # only valid as an argument of another constructor


@dataclass(frozen=True)
class TypeSpec:
    """One registry row.

    ``apply`` folds the constructor into the attributes (chain-level roles);
    ``evaluate`` turns a nested constructor into the value its parent consumes.
    """

    name: str
    role: Role
    apply: Callable[[EffectiveAttributes, TypeConstructor], EffectiveAttributes] | None = None
    evaluate: Callable[[TypeConstructor], object] | None = None


REGISTRY: dict[str, TypeSpec] = {}


def register_type(spec: TypeSpec) -> None:
    REGISTRY[spec.name] = spec


def lookup(ctor: TypeConstructor) -> TypeSpec:
    try:
        return REGISTRY[ctor.name]
    except KeyError:
        raise ChainError(f"unknown type '{ctor.name}'", ctor.pos) from None


def _expect_arity(ctor: TypeConstructor, n: int) -> None:
    if len(ctor.args) != n:
        plural = "argument" if n == 1 else "arguments"
        raise ChainError(f"type '{ctor.name}' takes {n} {plural}, got {len(ctor.args)}", ctor.pos)


def _int_arg(ctor: TypeConstructor, i: int) -> int:
    arg = ctor.args[i]
    if not isinstance(arg, int):
        raise ChainError(f"type '{ctor.name}' expects an integer argument, got '{arg}'", ctor.pos)
    if arg < 0:
        raise ChainError(f"type '{ctor.name}' expects a nonnegative rank, got {arg}", ctor.pos)
    return arg


def _ctor_arg(ctor: TypeConstructor, i: int) -> TypeConstructor:
    arg = ctor.args[i]
    if not isinstance(arg, TypeConstructor):
        raise ChainError(f"type '{ctor.name}' expects a type argument, got {arg}", ctor.pos)
    return arg


def _evaluate_nested(ctor: TypeConstructor, parent: str) -> object:
    spec = lookup(ctor)
    if spec.evaluate is None:
        raise ChainError(f"type '{ctor.name}' cannot be used inside '{parent}'", ctor.pos)
    return spec.evaluate(ctor)


def _apply_int(attrs, ctor):
    _expect_arity(ctor, 0)
    return replace(attrs, base_kind=BaseKind.INT)


def _apply_future(attrs, ctor):
    _expect_arity(ctor, 1)
    inner = _ctor_arg(ctor, 0)
    if inner.name != "Int" or inner.args:
        raise ChainError(f"only Future[Int] is supported, got '{ctor}'", ctor.pos)
    return replace(attrs, base_kind=BaseKind.FUTURE_INT)


def _apply_allocated(attrs, ctor):
    _expect_arity(ctor, 1)
    policy = _evaluate_nested(_ctor_arg(ctor, 0), ctor.name)
    if not isinstance(policy, (Everywhere, Single)):
        raise ChainError(f"'{ctor.args[0]}' is not an allocation policy", ctor.pos)
    return replace(attrs, allocation=policy)


def _eval_single(ctor):
    _expect_arity(ctor, 1)
    rank = _evaluate_nested(_ctor_arg(ctor, 0), ctor.name)
    if not isinstance(rank, int):
        raise ChainError(f"'{ctor.args[0]}' does not name a rank", ctor.pos)
    return Single(rank)


def _eval_on(ctor):
    _expect_arity(ctor, 1)
    return _int_arg(ctor, 0)


def _apply_channel(attrs, ctor):
    _expect_arity(ctor, 2)
    a, b = _int_arg(ctor, 0), _int_arg(ctor, 1)
    if a == b:
        raise ChainError(f"channel endpoints must differ, got {a} and {b}", ctor.pos)
    return replace(attrs, mechanism=Channel(a, b))


def _apply_flag(flag: str):
    def apply(attrs, ctor):
        _expect_arity(ctor, 0)
        return replace(attrs, **{flag: True})
    return apply


for _spec in (
    TypeSpec("Int", Role.BASE, apply=_apply_int),
    TypeSpec("Future", Role.BASE, apply=_apply_future),
    TypeSpec("allocated", Role.DATA, apply=_apply_allocated),
    TypeSpec("single", Role.NESTED, evaluate=_eval_single),
    TypeSpec("on", Role.NESTED, evaluate=_eval_on),
    TypeSpec("channel", Role.DATA, apply=_apply_channel),
    TypeSpec("spawnable", Role.FUNCTION, apply=_apply_flag("spawnable")),
    TypeSpec("dependencies", Role.FUNCTION, apply=_apply_flag("dependencies")),
):
    register_type(_spec)


def resolve_chain(type_chain: TypeChain) -> EffectiveAttributes:
    """Fold ``type_chain`` into its effective attributes, rightmost entry winning."""
    attrs = EffectiveAttributes()
    for entry in type_chain.entries:
        spec = lookup(entry)
        if spec.apply is None:
            raise ChainError(f"type '{entry.name}' cannot appear directly in a chain", entry.pos)
        attrs = spec.apply(attrs, entry)
    return attrs


def allocated_on(rank: int) -> TypeConstructor:
    return TypeConstructor("allocated", (TypeConstructor("single", (TypeConstructor("on", (rank,)),)),))


def channel_between(a: int, b: int) -> TypeConstructor:
    return TypeConstructor("channel", (a, b))


FUTURE_INT = TypeConstructor("Future", (TypeConstructor("Int"),))
