import random

import pytest

from atomcheck import BOTTOM, ClockStore, RecordingStore


def test_bottom_is_zero():
    assert BOTTOM == 0


def test_fresh_store_knows_nothing():
    s = ClockStore(3)
    for t1 in range(3):
        for t2 in range(3):
            if t1 == t2:
                continue
            assert s.successor(t1, 1, t2) == 0
            assert s.predecessor(t1, 1, t2) == 0
            assert not s.reachable(t1, 1, t2, 5)


def test_same_thread_reachability_is_id_order():
    s = ClockStore(2)
    assert s.reachable(0, 1, 0, 1)
    assert s.reachable(0, 1, 0, 7)
    assert not s.reachable(0, 7, 0, 1)


def test_single_edge_query_surface():
    # one recorded edge (1,2) -> (2,5); frozen expectations around it
    s = ClockStore(3)
    s.add_successor(1, 2, 2, 5)

    assert s.successor(1, 2, 2) == 5      # exact source
    assert s.successor(1, 1, 2) == 5      # earlier source reaches too
    assert s.successor(1, 3, 2) == 0      # later source knows nothing
    assert s.predecessor(2, 5, 1) == 2    # exact target
    assert s.predecessor(2, 7, 1) == 2    # later target still reached
    assert s.predecessor(2, 4, 1) == 0    # earlier target unreached

    assert s.reachable(1, 2, 2, 5)
    assert s.reachable(1, 2, 2, 6)
    assert not s.reachable(1, 2, 2, 4)
    assert not s.reachable(2, 5, 1, 2)    # edges are directed


def test_larger_source_wins():
    s = ClockStore(3)
    s.add_successor(1, 2, 2, 5)
    s.add_successor(1, 4, 2, 9)
    assert s.from_id[2][1] == 4
    assert s.to_id[2][1] == 9
    # the old weaker edge is forgotten by design
    assert s.successor(1, 2, 2) == 9


def test_equal_source_keeps_smaller_target():
    s = ClockStore(3)
    s.add_successor(1, 2, 2, 5)
    s.add_successor(1, 2, 2, 3)
    assert s.successor(1, 2, 2) == 3
    s.add_successor(1, 2, 2, 8)
    assert s.successor(1, 2, 2) == 3


def test_smaller_source_is_ignored():
    s = ClockStore(3)
    s.add_successor(1, 2, 2, 5)
    s.add_successor(1, 1, 2, 1)
    assert s.from_id[2][1] == 2
    assert s.to_id[2][1] == 5


def test_zero_endpoints_are_noops():
    s = ClockStore(2)
    s.add_successor(0, 0, 1, 5)
    s.add_successor(0, 3, 1, 0)
    assert s.snapshot() == (((0, 0), (0, 0)), ((0, 0), (0, 0)))


def test_same_thread_edge_raises():
    s = ClockStore(2)
    with pytest.raises(ValueError):
        s.add_successor(1, 1, 1, 2)


def test_negative_k_raises():
    with pytest.raises(ValueError):
        ClockStore(-1)


def test_entry_count_is_quadratic_in_threads_only():
    for k in (0, 1, 4, 9):
        s = ClockStore(k)
        assert s.entry_count() == 2 * k * k
    s = ClockStore(4)
    rng = random.Random(7)
    for _ in range(5000):
        a, b = rng.sample(range(4), 2)
        s.add_successor(a, rng.randrange(1, 1000), b, rng.randrange(1, 1000))
    assert s.entry_count() == 32
    assert len(s.from_id) == 4 and all(len(r) == 4 for r in s.from_id)
    assert len(s.to_id) == 4 and all(len(r) == 4 for r in s.to_id)


def test_add_successor_monotone_strengthening():
    # after any add sequence, replaying it never weakens an answer
    rng = random.Random(21)
    s = ClockStore(3)
    adds = []
    for _ in range(300):
        a, b = rng.sample(range(3), 2)
        adds.append((a, rng.randrange(1, 40), b, rng.randrange(1, 40)))
    for add in adds:
        before = {}
        for t2 in range(3):
            for j1 in range(1, 41):
                t1 = add[0]
                if t1 != t2:
                    before[(t1, j1, t2)] = s.successor(t1, j1, t2)
        s.add_successor(*add)
        for (t1, j1, t2), old in before.items():
            new = s.successor(t1, j1, t2)
            if old:
                assert new != 0, "an answered query lost its answer"


def test_snapshot_is_deep():
    s = ClockStore(2)
    s.add_successor(0, 1, 1, 1)
    snap = s.snapshot()
    s.add_successor(0, 5, 1, 9)
    assert snap == (((0, 0), (1, 0)), ((0, 0), (1, 0)))


def test_recording_store_logs_in_order():
    s = RecordingStore(3)
    s.add_successor(0, 1, 1, 2)
    s.successor(0, 1, 1)
    s.predecessor(1, 2, 0)
    s.reachable(0, 1, 1, 2)
    assert [op for op, _ in s.log] == ["add", "successor", "predecessor", "reachable"]
    assert s.log[0] == ("add", (0, 1, 1, 2))
