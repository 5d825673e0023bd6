"""Task runtime: a worker pool with futures and dependency-gated scheduling.

Tasks are identified by their spawn path: a root task spawned from outside
the pool gets ``(k,)`` and the j-th task spawned while a task ``p`` runs gets
``p + (j,)``.  Paths are schedule independent, which keeps exported DAGs
identical across worker counts.

A worker that blocks in :meth:`Runtime.synchronise` keeps executing other
ready tasks ("help-first"), preferring the task it is waiting on when that
task has not started yet.  This is what lets explicit synchronisation finish
with a single worker.
"""

from __future__ import annotations

import enum
import random
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Callable

from typechain.errors import ConfigError, RuntimeStateError

TaskId = tuple[int, ...]

WORKER_STACK_SIZE = 512 * 1024 * 1024


class TaskState(enum.Enum):
    GATED = "gated"
    READY = "ready-to-run"
    RUNNING = "running"
    WAITING = "waiting"  # running but parked in synchronise while its worker helps
    DONE = "done"


def format_id(task_id: TaskId) -> str:
    return ".".join(map(str, task_id))


class Future:
    """Handle to the result of one task; resolved exactly once."""

    __slots__ = ("id", "task", "_ready", "_value", "_error", "synchronised", "_dependents")

    def __init__(self, task: "TaskRecord"):
        self.id = task.id
        self.task = task
        self._ready = False
        self._value: int | None = None
        self._error: BaseException | None = None
        self.synchronised = False
        self._dependents: list[Callable[[], None]] = []

    @property
    def ready(self) -> bool:
        return self._ready

    def __repr__(self) -> str:
        state = f"ready={self._value}" if self._ready else "pending"
        return f"<Future {self.task.callee}@{format_id(self.id)} {state}>"


class TaskRecord:
    __slots__ = ("id", "callee", "fn", "args", "state", "dependency_edges", "result_future",
                 "_pending", "_children", "forwarded_to")

    def __init__(self, task_id: TaskId, callee: str, fn: Callable[..., Any], args: list):
        self.id = task_id
        self.callee = callee
        self.fn = fn
        self.args = args
        self.state = TaskState.READY
        self.dependency_edges: list[TaskId] = [a.id for a in args if isinstance(a, Future)]
        self.result_future = Future(self)
        self._pending = 0
        self._children = 0
        self.forwarded_to: Future | None = None

    def __repr__(self) -> str:
        return f"<Task {self.callee}@{format_id(self.id)} {self.state.value}>"


@dataclass(frozen=True)
class RuntimeConfig:
    worker_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.worker_count < 1:
            raise ConfigError(f"worker_count must be at least 1, got {self.worker_count}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True)
class TaskDag:
    """Quiescent snapshot of every task and its dependency edges.

    Nodes are numbered by spawn-path order, so dependency edges always run
    from a smaller number to a larger one.
    """

    tasks: tuple[TaskRecord, ...]

    @property
    def numbering(self) -> dict[TaskId, int]:
        return {t.id: i for i, t in enumerate(self.tasks)}

    def __len__(self) -> int:
        return len(self.tasks)

    def labels(self) -> list[str]:
        return [f"{t.callee}#{i}" for i, t in enumerate(self.tasks)]

    def edges(self) -> list[tuple[int, int]]:
        num = self.numbering
        return [(num[dep], num[t.id]) for t in self.tasks for dep in t.dependency_edges]

    def count(self, callee: str) -> int:
        return sum(1 for t in self.tasks if t.callee == callee)

    def to_dot(self, name: str = "tasks") -> str:
        lines = [f"digraph {name} {{"]
        for i, label in enumerate(self.labels()):
            lines.append(f'  "t{i}" [label="{label}"];')
        for dep, tid in self.edges():
            lines.append(f'  "t{dep}" -> "t{tid}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


class Runtime:
    def __init__(self, config: RuntimeConfig):
        self.config = config
        self._cond = threading.Condition()
        self._queue: OrderedDict[TaskId, TaskRecord] = OrderedDict()
        self._tasks: list[TaskRecord] = []
        self._roots = 0
        self._outstanding = 0  # futures not yet resolved
        self._active = 0       # tasks RUNNING or WAITING
        self._running = 0
        self._closed = False
        self._local = threading.local()
        self.errors: list[tuple[TaskRecord, BaseException]] = []
        self.max_running = 0
        self.gating_violations = 0
        self._workers = []
        old = threading.stack_size(WORKER_STACK_SIZE)
        try:
            for wid in range(config.worker_count):
                t = threading.Thread(target=self._worker_loop, args=(wid,), daemon=True,
                                     name=f"typechain-worker-{wid}")
                self._workers.append(t)
                t.start()
        finally:
            threading.stack_size(old)

    # spawning

    def _new_task(self, callee: str, fn: Callable, args: list) -> TaskRecord:
        stack = getattr(self._local, "stack", None)
        if stack:
            parent = stack[-1]
            task_id = parent.id + (parent._children,)
            parent._children += 1
        else:
            task_id = (self._roots,)
            self._roots += 1
        task = TaskRecord(task_id, callee, fn, args)
        self._tasks.append(task)
        self._outstanding += 1
        return task

    def spawn(self, callee: str, fn: Callable[..., Any], args: list) -> Future:
        """Schedule ``fn(*args)`` as a task and return its pending future."""
        if any(isinstance(a, Future) for a in args):
            raise ValueError("spawn() takes plain values; use spawn_with_dependencies for futures")
        return self.spawn_with_dependencies(callee, fn, args)

    def spawn_with_dependencies(self, callee: str, fn: Callable[..., Any], args: list) -> Future:
        """Schedule ``fn`` to run once every future in ``args`` is ready.

        Future arguments are replaced positionally by their values.  Until then
        the task is gated and occupies no worker.
        """
        with self._cond:
            if self._closed:
                raise RuntimeStateError("spawn after runtime shutdown")
            task = self._new_task(callee, fn, list(args))
            waiting = [a for a in task.args if isinstance(a, Future) and not a._ready]
            if waiting:
                task.state = TaskState.GATED
                task._pending = len(waiting)
                for fut in waiting:
                    fut._dependents.append(lambda task=task: self._dependency_resolved(task))
            else:
                self._enqueue(task)
            return task.result_future

    def _enqueue(self, task: TaskRecord) -> None:
        task.state = TaskState.READY
        self._queue[task.id] = task
        self._cond.notify_all()

    def _dependency_resolved(self, task: TaskRecord) -> None:
        task._pending -= 1
        if task._pending == 0:
            self._enqueue(task)

    # completion

    def _resolve(self, fut: Future, value: int | None, error: BaseException | None) -> None:
        """Resolve ``fut`` and everything forwarded from it.  Caller holds the lock."""
        work = [(fut, value, error)]
        while work:
            f, v, e = work.pop()
            assert not f._ready, f"future {f!r} completed twice"
            f._value, f._error = v, e
            f._ready = True
            self._outstanding -= 1
            if e is not None and f.task.forwarded_to is None:
                self.errors.append((f.task, e))
            dependents, f._dependents = f._dependents, []
            for dep in dependents:
                nxt = dep()
                if nxt is not None:
                    work.append((nxt, v, e))
        self._cond.notify_all()

    def _start(self, task: TaskRecord) -> list:
        """Mark ``task`` running and return its unwrapped arguments.  Lock held."""
        if any(isinstance(a, Future) and not a._ready for a in task.args):
            self.gating_violations += 1
        task.state = TaskState.RUNNING
        self._active += 1
        self._running += 1
        self.max_running = max(self.max_running, self._running)
        return [a._value if isinstance(a, Future) else a for a in task.args]

    def _execute(self, task: TaskRecord, args: list) -> None:
        failed = next((a._error for a in task.args if isinstance(a, Future) and a._error), None)
        result = error = None
        if failed is None:
            stack = self._local.__dict__.setdefault("stack", [])
            stack.append(task)
            try:
                result = task.fn(*args)
            except BaseException as exc:  # noqa: BLE001 - delivered through the future
                error = exc
            finally:
                stack.pop()
        else:
            error = failed
        with self._cond:
            task.state = TaskState.DONE
            self._active -= 1
            self._running -= 1
            if error is None and isinstance(result, Future):
                self._forward(task, result)
            else:
                self._resolve(task.result_future, result, error)

    def _forward(self, task: TaskRecord, inner: Future) -> None:
        """The task returned another future; its own future resolves with it."""
        outer = task.result_future
        task.forwarded_to = inner
        if inner._ready:
            self._resolve(outer, inner._value, inner._error)
        else:
            inner._dependents.append(lambda: outer)

    # workers

    def _worker_loop(self, wid: int) -> None:
        self._local.stack = []
        self._local.worker = wid
        rng = random.Random(self.config.seed * 7919 + wid) if self.config.seed else None
        while True:
            with self._cond:
                while not self._queue and not self._closed:
                    self._cond.wait()
                if not self._queue:
                    return
                if rng is not None and rng.random() < 0.5:
                    # perturb which worker claims the head of the queue
                    self._cond.wait(timeout=0)
                    if not self._queue:
                        continue
                _, task = self._queue.popitem(last=False)
                args = self._start(task)
            self._execute(task, args)

    def _is_worker(self) -> bool:
        return hasattr(self._local, "worker")

    def _help_candidate(self, fut: Future) -> TaskRecord | None:
        target = fut.task
        while target.forwarded_to is not None and not target.forwarded_to._ready:
            target = target.forwarded_to.task
        if target.state is TaskState.READY and target.id in self._queue:
            return self._queue.pop(target.id)
        if self._queue:
            return self._queue.popitem(last=False)[1]
        return None

    def synchronise(self, value: Any) -> int:
        """Wait for ``value`` if it is a future and return the integer it holds."""
        if not isinstance(value, Future):
            return value
        fut = value
        with self._cond:
            if not fut._ready:
                if self._is_worker():
                    self._help_until(fut)
                else:
                    while not fut._ready:
                        self._cond.wait()
            fut.synchronised = True
            if fut._error is not None:
                raise fut._error
            return fut._value

    def _help_until(self, fut: Future) -> None:
        stack = self._local.stack
        current = stack[-1] if stack else None
        if current is not None:
            current.state = TaskState.WAITING
            self._running -= 1
        try:
            while not fut._ready:
                task = self._help_candidate(fut)
                if task is None:
                    self._cond.wait()
                    continue
                args = self._start(task)
                self._cond.release()
                try:
                    self._execute(task, args)
                finally:
                    self._cond.acquire()
        finally:
            if current is not None:
                current.state = TaskState.RUNNING
                self._running += 1
                self.max_running = max(self.max_running, self._running)

    # inspection

    def try_result(self, fut: Future) -> int | None:
        """Non-blocking probe: the value if ready, ``None`` while pending."""
        with self._cond:
            if not fut._ready:
                return None
            if fut._error is not None:
                raise fut._error
            return fut._value

    def sample(self) -> dict[TaskState, int]:
        """Count tasks per state; also checks that running tasks are never gated."""
        with self._cond:
            counts = {s: 0 for s in TaskState}
            for task in self._tasks:
                counts[task.state] += 1
                if task.state is TaskState.RUNNING and any(
                        isinstance(a, Future) and not a._ready for a in task.args):
                    self.gating_violations += 1
            return counts

    @property
    def task_count(self) -> int:
        return len(self._tasks)

    def drain_and_shutdown(self) -> TaskDag:
        """Wait for every task, stop the workers and return the task DAG."""
        with self._cond:
            while self._outstanding:
                if not self._queue and self._active == 0:
                    gated = [t for t in self._tasks if t.state is TaskState.GATED]
                    self._closed = True
                    self._cond.notify_all()
                    raise RuntimeStateError(f"deadlock: {len(gated)} gated task(s) can never run")
                self._cond.wait()
            self._closed = True
            self._cond.notify_all()
        for t in self._workers:
            t.join()
        return TaskDag(tuple(sorted(self._tasks, key=lambda t: t.id)))

    def shutdown_now(self) -> None:
        """Stop accepting work and release idle workers without draining."""
        with self._cond:
            self._closed = True
            self._queue.clear()
            self._cond.notify_all()


def create_runtime(config: RuntimeConfig) -> Runtime:
    return Runtime(config)
