import threading
from graphlib import TopologicalSorter

import pytest

from oracles import call_tree, fib_oracle
from typechain.errors import ConfigError, RuntimeStateError
from typechain.taskrt import Future, RuntimeConfig, TaskState, create_runtime


@pytest.fixture
def runtime():
    rts = []

    def make(workers=2, seed=0):
        rt = create_runtime(RuntimeConfig(workers, seed))
        rts.append(rt)
        return rt

    yield make
    for rt in rts:
        rt.shutdown_now()


def add(a, b):
    return a + b


def sync_fib(rt):
    def fib(v):
        if v < 2:
            return v
        f1 = rt.spawn("fib", fib, [v - 1])
        f2 = rt.spawn("fib", fib, [v - 2])
        return rt.synchronise(f1) + rt.synchronise(f2)
    return fib


def deps_fib(rt):
    def fib(v):
        if v < 2:
            return v
        f1 = rt.spawn("fib", fib, [v - 1])
        f2 = rt.spawn("fib", fib, [v - 2])
        return rt.spawn_with_dependencies("add", add, [f1, f2])
    return fib


class TestCreate:
    def test_single_worker_completes_recursion(self, runtime):
        rt = runtime(1)
        fib = sync_fib(rt)
        assert rt.synchronise(rt.spawn("fib", fib, [15])) == fib_oracle(15) == 610

    def test_immediate_shutdown(self):
        rt = create_runtime(RuntimeConfig(8))
        dag = rt.drain_and_shutdown()
        assert len(dag) == 0 and rt.task_count == 0

    def test_zero_workers(self):
        with pytest.raises(ConfigError):
            RuntimeConfig(0)


class TestSpawn:
    @pytest.mark.parametrize("n, expected", [(0, 0), (1, 1), (10, 55)])
    def test_fib(self, runtime, n, expected):
        rt = runtime()
        assert expected == fib_oracle(n)
        assert rt.synchronise(rt.spawn("fib", sync_fib(rt), [n])) == expected

    def test_add(self, runtime):
        rt = runtime()
        assert rt.synchronise(rt.spawn("add", add, [2, 3])) == 5

    def test_returns_pending_immediately(self, runtime):
        rt = runtime(1)
        gate = threading.Event()
        fut = rt.spawn("wait", lambda: gate.wait() and 1, [])
        assert isinstance(fut, Future) and rt.try_result(fut) is None
        gate.set()
        assert rt.synchronise(fut) == 1

    def test_rejects_futures(self, runtime):
        rt = runtime()
        fut = rt.spawn("add", add, [1, 1])
        with pytest.raises(ValueError):
            rt.spawn("add", add, [fut, 1])

    def test_spawn_after_shutdown(self):
        rt = create_runtime(RuntimeConfig(1))
        rt.drain_and_shutdown()
        with pytest.raises(RuntimeStateError):
            rt.spawn("add", add, [1, 2])


class TestDependencies:
    def test_two_ready_futures(self, runtime):
        rt = runtime()
        one = rt.spawn("fib", sync_fib(rt), [1])
        other = rt.spawn("fib", sync_fib(rt), [2])
        assert rt.synchronise(rt.spawn_with_dependencies("add", add, [one, other])) == 2

    def test_plain_values_behave_as_spawn(self, runtime):
        rt = runtime()
        fut = rt.spawn_with_dependencies("add", add, [3, 4])
        assert fut.task.dependency_edges == []
        assert rt.synchronise(fut) == 7

    def test_gated_until_dependency_completes(self, runtime):
        rt = runtime(2)
        gate = threading.Event()

        def slow():
            gate.wait()
            return 10

        f1 = rt.spawn("slow", slow, [])
        dependent = rt.spawn_with_dependencies("add", add, [f1, 4])
        for _ in range(50):
            rt.sample()
            assert dependent.task.state is TaskState.GATED
        assert rt.try_result(dependent) is None
        gate.set()
        assert rt.synchronise(dependent) == 14
        assert rt.gating_violations == 0

    def test_positional_unwrapping(self, runtime):
        rt = runtime()
        a = rt.spawn("c", lambda: 10, [])
        b = rt.spawn("c", lambda: 3, [])
        assert rt.synchronise(rt.spawn_with_dependencies("sub", lambda x, y: x - y, [a, b])) == 7
        assert rt.synchronise(rt.spawn_with_dependencies("sub", lambda x, y: x - y, [b, a])) == -7

    def test_forwarded_result(self, runtime):
        rt = runtime(1)
        fib = deps_fib(rt)
        assert rt.synchronise(rt.spawn("fib", fib, [12])) == fib_oracle(12)


class TestSynchronise:
    def test_ready_future(self, runtime):
        rt = runtime()
        fut = rt.spawn("fib", sync_fib(rt), [10])
        rt.drain_and_shutdown()
        assert fut.ready
        assert rt.synchronise(fut) == 55

    def test_idempotent(self, runtime):
        rt = runtime()
        fut = rt.spawn("add", add, [20, 35])
        assert rt.synchronise(fut) == rt.synchronise(fut) == 55
        assert fut.synchronised

    def test_plain_value(self, runtime):
        assert runtime().synchronise(7) == 7

    def test_nested_error_propagates(self, runtime):
        rt = runtime(1)

        def boom():
            raise ZeroDivisionError("x")

        fut = rt.spawn("boom", boom, [])
        with pytest.raises(ZeroDivisionError):
            rt.synchronise(fut)
        dep = rt.spawn_with_dependencies("add", add, [fut, 1])
        with pytest.raises(ZeroDivisionError):
            rt.synchronise(dep)


class TestTryResult:
    def test_pending(self, runtime):
        rt = runtime(1)
        gate = threading.Event()
        fut = rt.spawn("long", lambda: gate.wait() and 0, [])
        assert rt.try_result(fut) is None
        assert rt.try_result(fut) is None
        gate.set()

    def test_after_synchronise(self, runtime):
        rt = runtime()
        fut = rt.spawn("fib", sync_fib(rt), [10])
        rt.synchronise(fut)
        assert rt.try_result(fut) == 55

    def test_after_drain(self):
        rt = create_runtime(RuntimeConfig(2))
        fut = rt.spawn("fib", sync_fib(rt), [1])
        rt.drain_and_shutdown()
        assert rt.try_result(fut) == 1


class TestDag:
    @pytest.mark.parametrize("n", [2, 5, 8])
    def test_counts_match_call_tree(self, n):
        rt = create_runtime(RuntimeConfig(3))
        rt.spawn("fib", deps_fib(rt), [n])
        dag = rt.drain_and_shutdown()
        fibs, adds = call_tree(n)
        assert (dag.count("fib"), dag.count("add")) == (fibs, adds)
        num = dag.numbering
        for task in dag.tasks:
            if task.callee == "add":
                assert len(task.dependency_edges) == 2
        preds = {i: set() for i in range(len(dag))}
        for dep, tid in dag.edges():
            assert dep < tid
            preds[tid].add(dep)
        assert len(list(TopologicalSorter(preds).static_order())) == len(dag)
        assert set(num.values()) == set(range(len(dag)))

    def test_frozen_counts(self):
        assert call_tree(5) == (15, 7)
        assert call_tree(2) == (3, 1)

    def test_empty(self):
        assert create_runtime(RuntimeConfig(1)).drain_and_shutdown().to_dot() == "digraph tasks {\n}\n"

    def test_dot_golden(self):
        rt = create_runtime(RuntimeConfig(1))
        rt.spawn("fib", deps_fib(rt), [2])
        dot = rt.drain_and_shutdown().to_dot("rank0")
        assert dot == (
            'digraph rank0 {\n'
            '  "t0" [label="fib#0"];\n'
            '  "t1" [label="fib#1"];\n'
            '  "t2" [label="fib#2"];\n'
            '  "t3" [label="add#3"];\n'
            '  "t1" -> "t3";\n'
            '  "t2" -> "t3";\n'
            '}\n')

    def test_identical_across_schedules(self):
        dots = set()
        for workers in (1, 2, 4, 8):
            for seed in (0, 1, 2):
                rt = create_runtime(RuntimeConfig(workers, seed))
                fut = rt.spawn("fib", deps_fib(rt), [9])
                assert rt.synchronise(fut) == 34
                dots.add(rt.drain_and_shutdown().to_dot())
        assert len(dots) == 1


@pytest.mark.parametrize("workers", [1, 2, 4, 8])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_results_schedule_invariant(workers, seed):
    rt = create_runtime(RuntimeConfig(workers, seed))
    a = rt.spawn("fib", sync_fib(rt), [11])
    b = rt.spawn("fib", deps_fib(rt), [11])
    assert (rt.synchronise(a), rt.synchronise(b)) == (89, 89)
    rt.drain_and_shutdown()
    assert rt.max_running <= workers
    assert rt.gating_violations == 0


@pytest.mark.parametrize("make_fib", [sync_fib, deps_fib], ids=["sync", "deps"])
def test_sampling_never_sees_gated_running(make_fib):
    rt = create_runtime(RuntimeConfig(4, 1))
    stop = threading.Event()
    seen = []

    def sampler():
        while not stop.is_set():
            counts = rt.sample()
            seen.append(counts)
            assert counts[TaskState.RUNNING] <= 4

    t = threading.Thread(target=sampler)
    t.start()
    try:
        assert rt.synchronise(rt.spawn("fib", make_fib(rt), [15])) == 610
    finally:
        stop.set()
        t.join()
    rt.drain_and_shutdown()
    assert seen and rt.gating_violations == 0
    assert max(c[TaskState.RUNNING] for c in seen) <= 4


def test_completed_once_is_asserted():
    rt = create_runtime(RuntimeConfig(1))
    fut = rt.spawn("add", add, [1, 1])
    rt.drain_and_shutdown()
    with pytest.raises(AssertionError):
        with rt._cond:
            rt._resolve(fut, 3, None)
    assert rt.try_result(fut) == 2


@pytest.mark.parametrize("make_fib", [sync_fib, deps_fib], ids=["sync", "deps"])
def test_fib15_single_worker(make_fib):
    rt = create_runtime(RuntimeConfig(1))
    assert rt.synchronise(rt.spawn("fib", make_fib(rt), [15])) == fib_oracle(15)
    rt.drain_and_shutdown()
