"""Simulated SPMD world: per-rank stores and a traced message layer.

Every World-level assignment and every read of a single-allocated variable
is collective: all ranks reach the same static statement, contribute, and the
last rank to arrive performs the operation for everybody.  Events are
therefore appended in a deterministic order.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass
from typing import Callable, Hashable, Union

from typechain.errors import ConfigError, RuntimeFault
from typechain.typesys.chains import Channel, EffectiveAttributes, Everywhere, Single

LOCAL_WRITE = "local_write"
RMA_PUT = "rma_put"
RMA_GET = "rma_get"
CHANNEL_SEND = "channel_send"
CHANNEL_RECV = "channel_recv"
BROADCAST = "broadcast"

EVENT_KINDS = (LOCAL_WRITE, RMA_PUT, RMA_GET, CHANNEL_SEND, CHANNEL_RECV, BROADCAST)

ALL = "all"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: str
    src: int
    dst: Union[int, str]
    var: str
    value: int
    deliveries: int | None = None  # broadcast only
    link: int | None = None        # channel pairs share the seq of their send

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "kind": self.kind, "src": self.src,
                           "dst": self.dst, "var": self.var, "value": self.value})


class CollectiveAborted(Exception):
    """Another rank failed while this rank waited at a collective point."""


class VirtualProcess:
    def __init__(self, rank: int):
        self.rank = rank
        # name -> (attributes, value or None); value slots exist only where allocated
        self.store: dict[str, tuple[EffectiveAttributes, int | None]] = {}
        self.allocated: set[str] = set()

    def holds(self, name: str) -> bool:
        return name in self.allocated


class World:
    def __init__(self, size: int, declared_vars: list[tuple[str, EffectiveAttributes]]):
        if size < 1:
            raise ConfigError(f"world size must be at least 1, got {size}")
        self.size = size
        self.ranks = [VirtualProcess(r) for r in range(size)]
        self.attrs: dict[str, EffectiveAttributes] = {}
        self.trace: list[TraceEvent] = []
        self._lock = threading.Condition()
        self._pending: dict[Hashable, dict[int, object]] = {}
        self._results: dict[Hashable, tuple[object, BaseException | None, int]] = {}
        self._aborted: BaseException | None = None
        for name, attrs in declared_vars:
            if isinstance(attrs.allocation, Single) and attrs.allocation.rank >= size:
                raise ConfigError(f"variable '{name}': owner rank {attrs.allocation.rank} out of range "
                                  f"for {size} process(es)")
            self.attrs[name] = attrs
            for proc in self.ranks:
                proc.store[name] = (attrs, None)
                if self._allocated_on(attrs, proc.rank):
                    proc.allocated.add(name)

    @staticmethod
    def _allocated_on(attrs: EffectiveAttributes, rank: int) -> bool:
        return isinstance(attrs.allocation, Everywhere) or attrs.allocation.rank == rank

    def _attrs(self, var: str) -> EffectiveAttributes:
        try:
            return self.attrs[var]
        except KeyError:
            raise RuntimeFault("E_UNDECLARED", f"undeclared variable '{var}'") from None

    def _emit(self, kind: str, src: int, dst, var: str, value: int, **extra) -> TraceEvent:
        event = TraceEvent(len(self.trace), kind, src, dst, var, value, **extra)
        self.trace.append(event)
        return event

    def _write(self, rank: int, var: str, value: int) -> None:
        proc = self.ranks[rank]
        assert proc.holds(var), f"store locality violated: {var} on rank {rank}"
        proc.store[var] = (proc.store[var][0], value)

    def _transfer(self, src: int, dst: int, var: str, value: int, mechanism) -> None:
        if isinstance(mechanism, Channel) and mechanism.covers(src, dst):
            send = self._emit(CHANNEL_SEND, src, dst, var, value)
            self._emit(CHANNEL_RECV, src, dst, var, value, link=send.seq)
        else:
            self._emit(RMA_PUT, src, dst, var, value)

    # whole-world operations

    def assign_value(self, var: str, values: list[int]) -> None:
        """All ranks assign ``values[rank]`` to ``var`` at the same statement."""
        attrs = self._attrs(var)
        if len(values) != self.size:
            raise ValueError(f"expected {self.size} values, got {len(values)}")
        if isinstance(attrs.allocation, Everywhere):
            for rank, value in enumerate(values):
                self._emit(LOCAL_WRITE, rank, rank, var, value)
                self._write(rank, var, value)
            return
        owner = attrs.allocation.rank
        # ascending writer order at the owner; the last write wins
        for rank, value in enumerate(values):
            if rank == owner:
                self._emit(LOCAL_WRITE, rank, rank, var, value)
            else:
                self._transfer(rank, owner, var, value, attrs.mechanism)
            self._write(owner, var, value)

    def read_value(self, var: str) -> list[int]:
        """All ranks evaluate ``var``; returns the value each rank obtains."""
        attrs = self._attrs(var)
        if isinstance(attrs.allocation, Everywhere):
            return [self.read_local(rank, var) for rank in range(self.size)]
        owner = attrs.allocation.rank
        value = self.ranks[owner].store[var][1]
        if value is None:
            raise RuntimeFault("E_UNASSIGNED", f"use of unassigned variable {var}")
        receivers = [r for r in range(self.size) if r != owner]
        mech = attrs.mechanism
        channelled = [r for r in receivers if isinstance(mech, Channel) and mech.covers(owner, r)]
        rest = len(receivers) - len(channelled)
        if rest:
            self._emit(BROADCAST, owner, ALL, var, value, deliveries=rest)
        for r in channelled:
            self._transfer(owner, r, var, value, mech)
        return [value] * self.size

    def read_local(self, rank: int, var: str) -> int:
        proc = self.ranks[rank]
        if not proc.holds(var):
            raise RuntimeFault("E_NOT_LOCAL", f"variable {var} is not allocated on rank {rank}")
        value = proc.store[var][1]
        if value is None:
            raise RuntimeFault("E_UNASSIGNED", f"use of unassigned variable {var}")
        return value

    def trace_snapshot(self) -> tuple[TraceEvent, ...]:
        with self._lock:
            return tuple(self.trace)

    def value_slots(self, var: str) -> dict[int, int | None]:
        """Ranks that hold storage for ``var`` and the value each holds."""
        return {p.rank: p.store[var][1] for p in self.ranks if p.holds(var)}

    def check_store_shape(self) -> None:
        for proc in self.ranks:
            for name, (attrs, value) in proc.store.items():
                if value is not None and not self._allocated_on(attrs, proc.rank):
                    raise AssertionError(f"rank {proc.rank} holds a value for {name}")

    # rank-thread rendezvous

    def collective(self, key: Hashable, rank: int, contribution: object,
                   action: Callable[[list], list]) -> object:
        """Block until every rank reaches ``key``; the last one runs ``action``.

        ``action`` receives the contributions ordered by rank and returns one
        result per rank.  An error raised by ``action`` is re-raised on every
        rank.
        """
        with self._lock:
            if self._aborted is not None:
                raise CollectiveAborted() from self._aborted
            slot = self._pending.setdefault(key, {})
            slot[rank] = contribution
            if len(slot) == self.size:
                del self._pending[key]
                ordered = [slot[r] for r in range(self.size)]
                try:
                    results, error = action(ordered), None
                except RuntimeFault as exc:
                    results, error = None, exc
                self._results[key] = (results, error, self.size)
                self._lock.notify_all()
            else:
                while key not in self._results:
                    if self._aborted is not None:
                        raise CollectiveAborted() from self._aborted
                    self._lock.wait()
            results, error, remaining = self._results[key]
            if remaining == 1:
                del self._results[key]
            else:
                self._results[key] = (results, error, remaining - 1)
            if error is not None:
                raise error
            return results[rank]

    def abort(self, error: BaseException) -> None:
        """Release every rank waiting at a collective point."""
        with self._lock:
            if self._aborted is None:
                self._aborted = error
            self._lock.notify_all()

    def collective_assign(self, key: Hashable, rank: int, var: str, value: int) -> None:
        def action(values):
            self.assign_value(var, values)
            return [None] * self.size
        self.collective(key, rank, value, action)

    def collective_read(self, key: Hashable, rank: int, var: str) -> int:
        return self.collective(key, rank, None, lambda _: self.read_value(var))


def create_world(size: int, declared_vars: list[tuple[str, EffectiveAttributes]]) -> World:
    return World(size, declared_vars)


def trace_snapshot(world: World) -> tuple[TraceEvent, ...]:
    return world.trace_snapshot()


def write_trace(path, events) -> None:
    """Write events as JSON lines, replacing ``path`` atomically."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".trace-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for event in events:
                fh.write(event.to_json() + "\n")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
