"""Tree-walking evaluator.

Top-level statements run SPMD: one thread per virtual process, each thread
owning its own task runtime.  Function calls dispatch on the resolved
decoration of the callee:

    neither flag          run the body inline
    spawnable             spawn a task, return its future
    spawnable + deps      spawn a task gated on its future arguments
    dependencies only     synchronise future arguments, then run inline
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field

from typechain.distsim import CollectiveAborted, TraceEvent, World
from typechain.errors import ConfigError, Pos, RuntimeFault, RuntimeStateError
from typechain.frontend import ast
from typechain.taskrt import Future, Runtime, RuntimeConfig, TaskDag, format_id
from typechain.typesys.chains import BaseKind, EffectiveAttributes, Single, resolve_chain

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

MAX_CALL_DEPTH = 100_000
RANK_STACK_SIZE = 512 * 1024 * 1024

UNASSIGNED = "<unassigned>"

_NO_RETURN = object()


def _wrap64(value: int) -> int:
    return (value - INT64_MIN) % 2**64 + INT64_MIN


@dataclass
class RunOutcome:
    procs: int
    variables: list[str]
    snapshots: list[dict[str, int | str]]
    trace: tuple[TraceEvent, ...]
    dags: list[TaskDag]
    output: list[str] = field(default_factory=list)
    error: RuntimeFault | None = None

    @property
    def status(self) -> int:
        return 0 if self.error is None else 1

    def value(self, rank: int, name: str):
        return self.snapshots[rank].get(name)

    def snapshot_lines(self) -> list[str]:
        return [f"rank {rank}: {name} = {snap[name]}"
                for rank, snap in enumerate(self.snapshots)
                for name in self.variables if name in snap]

    def dag_dot(self) -> str:
        return "".join(dag.to_dot(f"rank{rank}") for rank, dag in enumerate(self.dags))


class Frame:
    """Variables of one function activation (or of a rank's top level)."""

    __slots__ = ("values", "kinds", "top")

    def __init__(self, top: bool = False):
        self.values: dict[str, object] = {}
        self.kinds: dict[str, BaseKind] = {}
        self.top = top


class RankContext:
    def __init__(self, rank: int, runtime: Runtime):
        self.rank = rank
        self.runtime = runtime
        self.output: list[str] = []
        self.occurrences: dict[int, int] = {}

    def collective_key(self, node) -> tuple[int, int]:
        n = self.occurrences.get(id(node), 0)
        self.occurrences[id(node)] = n + 1
        return (id(node), n)


class Interpreter:
    def __init__(self, program: ast.Ast, procs: int = 1, workers: int = 1, seed: int = 0,
                 checked: bool = True, max_depth: int = MAX_CALL_DEPTH):
        self.program = program
        self.procs = procs
        self.runtime_config = RuntimeConfig(workers, seed)
        self.checked = checked
        self.max_depth = max_depth
        self.functions = {fn.name: fn for fn in program.functions}
        self.decorations: dict[str, EffectiveAttributes] = {
            fn.name: resolve_chain(fn.decoration) if fn.decoration else EffectiveAttributes()
            for fn in program.functions
        }
        self.world_vars: list[tuple[str, EffectiveAttributes]] = []
        self.handle_vars: list[str] = []
        self.declared: list[str] = []
        self._collect_top_level(program.top_level)
        self.world_names = {name for name, _ in self.world_vars}
        self.world = World(procs, self.world_vars)
        self._depth = threading.local()
        self.runtimes: list[Runtime] = []

    def _collect_top_level(self, stmts) -> None:
        for stmt in stmts:
            if isinstance(stmt, ast.VarDecl):
                attrs = resolve_chain(stmt.chain)
                for name in stmt.names:
                    self.declared.append(name)
                    if attrs.base_kind is BaseKind.FUTURE_INT:
                        self.handle_vars.append(name)
                    else:
                        self.world_vars.append((name, attrs))
            elif isinstance(stmt, ast.If):
                self._collect_top_level(stmt.then)
                self._collect_top_level(stmt.orelse or [])

    # driver

    def run(self) -> RunOutcome:
        contexts = [RankContext(r, Runtime(self.runtime_config)) for r in range(self.procs)]
        self.runtimes = [ctx.runtime for ctx in contexts]
        frames = [self._top_frame() for _ in range(self.procs)]
        errors: list[BaseException | None] = [None] * self.procs
        dags: list[TaskDag | None] = [None] * self.procs

        def rank_main(ctx: RankContext, frame: Frame) -> None:
            try:
                try:
                    self.exec_block(self.program.top_level, frame, ctx)
                except BaseException:
                    ctx.runtime.shutdown_now()
                    raise
                dags[ctx.rank] = ctx.runtime.drain_and_shutdown()
                if ctx.runtime.errors:
                    _, exc = min(ctx.runtime.errors, key=lambda item: item[0].id)
                    raise exc
            except BaseException as exc:  # noqa: BLE001 - reported per rank
                errors[ctx.rank] = exc
                self.world.abort(exc)

        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, self.max_depth * 12))
        old_stack = threading.stack_size(RANK_STACK_SIZE)
        try:
            threads = [threading.Thread(target=rank_main, args=(ctx, fr), name=f"rank-{ctx.rank}")
                       for ctx, fr in zip(contexts, frames)]
            for t in threads:
                t.start()
        finally:
            threading.stack_size(old_stack)
        for t in threads:
            t.join()

        outcome = RunOutcome(
            procs=self.procs,
            variables=list(self.declared),
            snapshots=[self._snapshot(r, frames[r]) for r in range(self.procs)],
            trace=self.world.trace_snapshot(),
            dags=[d if d is not None else TaskDag(()) for d in dags],
            output=[line for ctx in contexts for line in ctx.output],
        )
        outcome.error = self._primary_error(errors)
        return outcome

    def _primary_error(self, errors) -> RuntimeFault | None:
        for rank, exc in enumerate(errors):
            if exc is None or isinstance(exc, CollectiveAborted):
                continue
            if isinstance(exc, RecursionError):
                exc = RuntimeFault("E_RECURSION", "maximum recursion depth exceeded")
            elif isinstance(exc, RuntimeStateError):
                exc = RuntimeFault("E_RUNTIME", exc.message, exc.pos)
            elif not isinstance(exc, RuntimeFault):
                raise exc
            if exc.rank is None:
                exc.rank = rank
            return exc
        return None

    def _top_frame(self) -> Frame:
        frame = Frame(top=True)
        for name in self.handle_vars:
            frame.values[name] = None
            frame.kinds[name] = BaseKind.FUTURE_INT
        return frame

    def _snapshot(self, rank: int, frame: Frame) -> dict[str, int | str]:
        snap: dict[str, int | str] = {}
        for name in self.declared:
            if name in self.world_names:
                slots = self.world.value_slots(name)
                if rank in slots:
                    snap[name] = UNASSIGNED if slots[rank] is None else slots[rank]
                continue
            fut = frame.values.get(name)
            if isinstance(fut, Future) and fut.ready and fut._error is None:
                snap[name] = fut._value
            else:
                snap[name] = UNASSIGNED
        return snap

    # statements

    def exec_block(self, stmts, frame: Frame, ctx: RankContext):
        for stmt in stmts:
            result = self.exec_stmt(stmt, frame, ctx)
            if result is not _NO_RETURN:
                return result
        return _NO_RETURN

    def exec_stmt(self, stmt, frame: Frame, ctx: RankContext):
        if isinstance(stmt, ast.Assign):
            self.eval_assignment(stmt, frame, ctx)
        elif isinstance(stmt, ast.ExprStmt):
            self.eval(stmt.call, frame, ctx)
        elif isinstance(stmt, ast.Return):
            return 0 if stmt.value is None else self.eval(stmt.value, frame, ctx)
        elif isinstance(stmt, ast.If):
            if self._int(self.eval(stmt.cond, frame, ctx), stmt.cond.pos):
                return self.exec_block(stmt.then, frame, ctx)
            if stmt.orelse is not None:
                return self.exec_block(stmt.orelse, frame, ctx)
        elif isinstance(stmt, ast.VarDecl):
            if not frame.top:
                kind = resolve_chain(stmt.chain).base_kind
                for name in stmt.names:
                    frame.values[name] = None
                    frame.kinds[name] = kind
        else:
            raise TypeError(f"unknown statement {stmt!r}")
        return _NO_RETURN

    def eval_assignment(self, stmt: ast.Assign, frame: Frame, ctx: RankContext) -> None:
        value = self.eval(stmt.value, frame, ctx)
        if frame.top and stmt.target in self.world_names:
            if isinstance(value, Future):
                raise RuntimeFault("E_TYPE", f"Future handle assigned to Int variable '{stmt.target}'",
                                   stmt.pos)
            self.world.collective_assign(ctx.collective_key(stmt), ctx.rank, stmt.target, value)
            return
        kind = frame.kinds.get(stmt.target)
        if kind is None:
            raise RuntimeFault("E_UNDECLARED", f"assignment to undeclared variable '{stmt.target}'",
                               stmt.pos)
        if kind is BaseKind.INT and isinstance(value, Future):
            raise RuntimeFault("E_TYPE", f"Future handle assigned to Int variable '{stmt.target}'",
                               stmt.pos)
        if kind is BaseKind.FUTURE_INT and not isinstance(value, Future):
            raise RuntimeFault("E_TYPE", f"Int value assigned to Future variable '{stmt.target}'",
                               stmt.pos)
        frame.values[stmt.target] = value

    # expressions

    def _int(self, value, pos: Pos) -> int:
        if isinstance(value, Future):
            raise RuntimeFault("E_TYPE", "Future used where an Int is required", pos)
        return value

    def _arith(self, value: int, pos: Pos) -> int:
        if INT64_MIN <= value <= INT64_MAX:
            return value
        if self.checked:
            raise RuntimeFault("E_OVERFLOW", "64-bit integer overflow", pos)
        return _wrap64(value)

    def eval(self, expr, frame: Frame, ctx: RankContext):
        if isinstance(expr, ast.IntLiteral):
            return expr.value
        if isinstance(expr, ast.VarRef):
            return self.eval_var(expr, frame, ctx)
        if isinstance(expr, ast.Binary):
            return self.eval_binary(expr, frame, ctx)
        if isinstance(expr, ast.Call):
            return self.eval_call(expr, frame, ctx)
        if isinstance(expr, ast.FieldAccess):
            return self.eval_field_access(expr, frame, ctx)
        if isinstance(expr, ast.Unary):
            return self._arith(-self._int(self.eval(expr.operand, frame, ctx), expr.pos), expr.pos)
        raise TypeError(f"unknown expression {expr!r}")

    def eval_var(self, expr: ast.VarRef, frame: Frame, ctx: RankContext):
        name = expr.name
        if frame.top and name in self.world_names:
            attrs = self.world.attrs[name]
            try:
                if isinstance(attrs.allocation, Single):
                    return self.world.collective_read(ctx.collective_key(expr), ctx.rank, name)
                return self.world.read_local(ctx.rank, name)
            except RuntimeFault as exc:
                raise RuntimeFault(exc.code, exc.message, expr.pos) from None
        if name not in frame.kinds:
            raise RuntimeFault("E_UNDECLARED", f"undeclared variable '{name}'", expr.pos)
        value = frame.values[name]
        if value is None:
            raise RuntimeFault("E_UNASSIGNED", f"use of unassigned variable {name}", expr.pos)
        return value

    def eval_binary(self, expr: ast.Binary, frame: Frame, ctx: RankContext) -> int:
        op = expr.op
        lhs = self._int(self.eval(expr.lhs, frame, ctx), expr.lhs.pos)
        if op == "||":
            return 1 if lhs or self._int(self.eval(expr.rhs, frame, ctx), expr.rhs.pos) else 0
        if op == "&&":
            return 1 if lhs and self._int(self.eval(expr.rhs, frame, ctx), expr.rhs.pos) else 0
        rhs = self._int(self.eval(expr.rhs, frame, ctx), expr.rhs.pos)
        if op == "+":
            return self._arith(lhs + rhs, expr.pos)
        if op == "-":
            return self._arith(lhs - rhs, expr.pos)
        if op == "*":
            return self._arith(lhs * rhs, expr.pos)
        if op == "/":
            if rhs == 0:
                raise RuntimeFault("E_DIV_ZERO", "division by zero", expr.pos)
            quotient = abs(lhs) // abs(rhs)
            return self._arith(quotient if (lhs < 0) == (rhs < 0) else -quotient, expr.pos)
        if op == "==":
            return int(lhs == rhs)
        if op == "!=":
            return int(lhs != rhs)
        if op == "<":
            return int(lhs < rhs)
        if op == ">":
            return int(lhs > rhs)
        raise TypeError(f"unknown operator {op}")

    def eval_field_access(self, expr: ast.FieldAccess, frame: Frame, ctx: RankContext) -> int:
        """``f.val``: the value of a synchronised future; never waits."""
        fut = self.eval(expr.target, frame, ctx)
        if not isinstance(fut, Future):
            raise RuntimeFault("E_TYPE", "'.val' applies only to Future values", expr.pos)
        if not (fut.ready and fut.synchronised):
            raise RuntimeFault(
                "E_FUTURE_NOT_READY",
                f"future of task {fut.task.callee}@{format_id(fut.id)} is not ready; "
                "synchronise it before reading .val", expr.pos)
        if fut._error is not None:
            raise fut._error
        return fut._value

    def eval_call(self, expr: ast.Call, frame: Frame, ctx: RankContext):
        args = [self.eval(a, frame, ctx) for a in expr.args]
        if expr.name == "synchronise":
            return ctx.runtime.synchronise(args[0])
        if expr.name == "print":
            ctx.output.append(f"rank {ctx.rank}: {self._int(args[0], expr.pos)}")
            return 0
        decl = self.functions.get(expr.name)
        if decl is None:
            raise RuntimeFault("E_UNDEFINED", f"call to undefined function '{expr.name}'", expr.pos)
        return self.call_function(decl, args, ctx, expr.pos)

    def call_function(self, decl: ast.FunctionDecl, args: list, ctx: RankContext,
                      pos: Pos | None = None):
        if len(args) != len(decl.params):
            raise RuntimeFault("E_ARITY", f"'{decl.name}' takes {len(decl.params)} arguments, "
                               f"got {len(args)}", pos or decl.pos)
        attrs = self.decorations[decl.name]
        if not attrs.dependencies and any(isinstance(a, Future) for a in args):
            raise RuntimeFault("E_FUTURE_ARG", f"Future passed to '{decl.name}', which does not "
                               "declare dependencies", pos or decl.pos)

        def body(*values):
            return self.invoke(decl, values, ctx)

        if attrs.spawnable:
            if attrs.dependencies:
                return ctx.runtime.spawn_with_dependencies(decl.name, body, args)
            return ctx.runtime.spawn(decl.name, body, args)
        if attrs.dependencies:
            args = [ctx.runtime.synchronise(a) for a in args]
        return self.invoke(decl, args, ctx)

    def invoke(self, decl: ast.FunctionDecl, args, ctx: RankContext):
        depth = getattr(self._depth, "n", 0)
        if depth >= self.max_depth:
            raise RuntimeFault("E_RECURSION", f"call depth limit {self.max_depth} exceeded in "
                               f"'{decl.name}'", decl.pos)
        frame = Frame()
        for param, value in zip(decl.params, args):
            frame.values[param.name] = value
            frame.kinds[param.name] = BaseKind.INT
        self._depth.n = depth + 1
        try:
            result = self.exec_block(decl.body, frame, ctx)
        except RecursionError:
            raise RuntimeFault("E_RECURSION", f"stack exhausted in '{decl.name}'", decl.pos) from None
        finally:
            self._depth.n = depth
        if result is _NO_RETURN:
            raise RuntimeFault("E_NO_RETURN", f"'{decl.name}' finished without returning a value",
                               decl.pos)
        return result


def run_program(program: ast.Ast, procs: int = 1, workers: int = 1, seed: int = 0,
                checked: bool = True) -> RunOutcome:
    """Run a checked program on ``procs`` virtual processes.

    Raises :class:`ConfigError` for a bad configuration; runtime failures
    are reported through ``RunOutcome.error``.
    """
    if procs < 1:
        raise ConfigError(f"--procs must be at least 1, got {procs}")
    return Interpreter(program, procs, workers, seed, checked).run()
