import json
import threading
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from typechain.distsim import (
    BROADCAST, CHANNEL_RECV, CHANNEL_SEND, LOCAL_WRITE, RMA_PUT, create_world, trace_snapshot,
    write_trace,
)
from typechain.errors import ConfigError, RuntimeFault
from typechain.typesys.chains import BaseKind, Channel, EffectiveAttributes, Single

EVERYWHERE = EffectiveAttributes(base_kind=BaseKind.INT)


def single(rank, channel=None):
    attrs = EffectiveAttributes(base_kind=BaseKind.INT, allocation=Single(rank))
    if channel:
        attrs = EffectiveAttributes(base_kind=BaseKind.INT, allocation=Single(rank), mechanism=Channel(*channel))
    return attrs


def kinds(world, var=None):
    return Counter(e.kind for e in trace_snapshot(world) if var is None or e.var == var)


class TestCreateWorld:
    def test_everywhere(self):
        world = create_world(4, [("a", EVERYWHERE)])
        assert sorted(world.value_slots("a")) == [0, 1, 2, 3]

    def test_single(self):
        world = create_world(4, [("b", single(0))])
        assert list(world.value_slots("b")) == [0]

    def test_owner_out_of_range(self):
        with pytest.raises(ConfigError, match="owner rank 5 out of range"):
            create_world(2, [("c", single(5))])

    def test_fresh_trace(self):
        assert trace_snapshot(create_world(3, [("a", EVERYWHERE)])) == ()


class TestAssign:
    def test_everywhere(self):
        world = create_world(4, [("a", EVERYWHERE)])
        world.assign_value("a", [22] * 4)
        assert kinds(world) == Counter({LOCAL_WRITE: 4})
        assert world.value_slots("a") == {0: 22, 1: 22, 2: 22, 3: 22}

    def test_single_owner(self):
        world = create_world(4, [("b", single(0))])
        world.assign_value("b", [22] * 4)
        assert kinds(world) == Counter({LOCAL_WRITE: 1, RMA_PUT: 3})
        assert all(e.dst == 0 for e in trace_snapshot(world))
        assert world.value_slots("b") == {0: 22}

    def test_channel_pair(self):
        world = create_world(2, [("c", single(0, (0, 1)))])
        world.assign_value("c", [22, 22])
        events = trace_snapshot(world)
        assert kinds(world) == Counter({LOCAL_WRITE: 1, CHANNEL_SEND: 1, CHANNEL_RECV: 1})
        send, recv = events[1], events[2]
        assert (send.src, send.dst, recv.link) == (1, 0, send.seq)

    def test_last_writer_wins_ascending(self):
        world = create_world(4, [("b", single(2))])
        world.assign_value("b", [10, 11, 12, 13])
        assert world.value_slots("b") == {2: 13}
        assert [e.src for e in trace_snapshot(world)] == [0, 1, 2, 3]

    def test_undeclared(self):
        with pytest.raises(RuntimeFault):
            create_world(1, []).assign_value("nope", [1])


class TestRead:
    def test_broadcast(self):
        world = create_world(4, [("b", single(0))])
        world.assign_value("b", [22] * 4)
        assert world.read_value("b") == [22] * 4
        casts = [e for e in trace_snapshot(world) if e.kind == BROADCAST]
        assert len(casts) == 1
        assert (casts[0].src, casts[0].dst, casts[0].deliveries) == (0, "all", 3)

    def test_single_rank_no_events(self):
        world = create_world(1, [("b", single(0))])
        world.assign_value("b", [22])
        before = len(trace_snapshot(world))
        assert world.read_value("b") == [22]
        assert len(trace_snapshot(world)) == before

    def test_owner_read_same_for_any_size(self):
        values = []
        for size in (1, 4):
            world = create_world(size, [("b", single(0))])
            world.assign_value("b", [22] * size)
            values.append(world.read_value("b")[0])
        assert values == [22, 22]

    def test_unassigned(self):
        world = create_world(2, [("b", single(0))])
        with pytest.raises(RuntimeFault, match="use of unassigned variable b"):
            world.read_value("b")

    def test_channel_leg_of_broadcast(self):
        world = create_world(4, [("c", single(0, (0, 1)))])
        world.assign_value("c", [5] * 4)
        n = len(trace_snapshot(world))
        world.read_value("c")
        new = trace_snapshot(world)[n:]
        assert [(e.kind, e.dst) for e in new] == [
            (BROADCAST, "all"), (CHANNEL_SEND, 1), (CHANNEL_RECV, 1)]
        assert new[0].deliveries == 2

    def test_everywhere_local(self):
        world = create_world(3, [("a", EVERYWHERE)])
        world.assign_value("a", [1, 2, 3])
        assert world.read_value("a") == [1, 2, 3]
        assert kinds(world) == Counter({LOCAL_WRITE: 3})


def test_listing1_scenario():
    world = create_world(4, [("a", EVERYWHERE), ("b", single(0)), ("c", single(0, (0, 1)))])
    world.assign_value("b", [22] * 4)
    assert kinds(world, "b") == Counter({LOCAL_WRITE: 1, RMA_PUT: 3})
    world.assign_value("c", [22] * 4)
    c_events = {e.src: e.kind for e in trace_snapshot(world) if e.var == "c" and e.kind != CHANNEL_RECV}
    # derived per pair: {1,0} matches the channel, {2,0} and {3,0} do not
    assert c_events == {0: LOCAL_WRITE, 1: CHANNEL_SEND, 2: RMA_PUT, 3: RMA_PUT}


@pytest.mark.parametrize("size", [1, 2, 4, 8])
def test_event_conservation(size):
    owner = size - 1
    world = create_world(size, [("b", single(owner))])
    world.assign_value("b", list(range(size)))
    expected = Counter({LOCAL_WRITE: 1, RMA_PUT: size - 1})
    assert kinds(world) == +expected  # unary + drops zero counts
    world.check_store_shape()


@given(size=st.integers(1, 8), owner=st.integers(0, 7), lo=st.integers(0, 7), hi=st.integers(0, 7),
       value=st.integers(-2**63, 2**63 - 1))
def test_mechanism_exclusivity_and_agreement(size, owner, lo, hi, value):
    owner %= size
    channel = (lo, hi) if lo != hi else None
    world = create_world(size, [("b", single(owner, channel)), ("a", EVERYWHERE)])
    world.assign_value("b", [value] * size)
    sends = Counter(e.src for e in trace_snapshot(world) if e.kind in (RMA_PUT, CHANNEL_SEND))
    assert sends == Counter(r for r in range(size) if r != owner)
    world.assign_value("a", world.read_value("b"))
    assert set(world.value_slots("a").values()) == {value}
    world.check_store_shape()


def test_json_lines_schema(tmp_path):
    world = create_world(2, [("b", single(0))])
    world.assign_value("b", [22, 22])
    world.read_value("b")
    path = tmp_path / "t.jsonl"
    write_trace(path, trace_snapshot(world))
    text = path.read_text()
    assert text.endswith("\n")
    rows = [json.loads(line) for line in text.splitlines()]
    assert all(set(r) == {"seq", "kind", "src", "dst", "var", "value"} for r in rows)
    assert rows[-1] == {"seq": 2, "kind": "broadcast", "src": 0, "dst": "all", "var": "b", "value": 22}
    assert [r["seq"] for r in rows] == [0, 1, 2]


def test_collectives_from_rank_threads():
    size = 4
    world = create_world(size, [("b", single(0)), ("a", EVERYWHERE)])
    results = [None] * size

    def rank(r):
        world.collective_assign(("assign", 0), r, "b", 22)
        results[r] = world.collective_read(("read", 0), r, "b")
        world.collective_assign(("assign", 1), r, "a", results[r])

    threads = [threading.Thread(target=rank, args=(r,)) for r in range(size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == [22] * 4
    assert [e.kind for e in trace_snapshot(world)] == [
        LOCAL_WRITE, RMA_PUT, RMA_PUT, RMA_PUT, BROADCAST] + [LOCAL_WRITE] * 4


def test_collective_error_reaches_every_rank():
    world = create_world(3, [("b", single(0))])
    errors = []

    def rank(r):
        try:
            world.collective_read(("read", 0), r, "b")
        except RuntimeFault as exc:
            errors.append(exc.code)

    threads = [threading.Thread(target=rank, args=(r,)) for r in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == ["E_UNASSIGNED"] * 3
