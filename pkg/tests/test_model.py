import pytest

from atomcheck.model import (
    ACQUIRE,
    BEGIN,
    END,
    FORK,
    READ,
    RELEASE,
    WRITE,
    Event,
    NormalizeError,
    Trace,
    TraceBuilder,
    conflicts,
    normalize,
    validate,
)


def ev(tid, op, target, seq=1, pos=1):
    return Event(tid, seq, op, target, pos)


def test_op_codes_are_distinct():
    codes = {BEGIN, END, READ, WRITE, ACQUIRE, RELEASE, FORK}
    assert len(codes) == 7


def test_builder_interns_by_first_appearance(build):
    t = build(
        [
            ("main", "b"),
            ("main", "w", "count"),
            ("main", "e"),
            ("aux", "b"),
            ("aux", "r", "count"),
            ("aux", "e"),
        ]
    )
    # canonical thread names after normalize, one id per source thread
    assert t.k == 2
    assert t.thread_names == ["T0", "T1"]
    assert t.var_names == ["count"]
    assert t.events[0].tid == 0
    assert t.events[3].tid == 1


def test_builder_output_is_validated(build):
    t = build([("T0", "b"), ("T0", "r", "x"), ("T0", "e")])
    rep = validate(t)
    assert rep.ok, rep.defects


def test_positions_and_seqs_are_contiguous(build):
    t = build(
        [
            ("T0", "b"),
            ("T1", "b"),
            ("T0", "w", "x"),
            ("T1", "r", "x"),
            ("T0", "e"),
            ("T1", "e"),
        ]
    )
    assert [e.pos for e in t.events] == list(range(1, 7))
    for row in t.per_thread():
        assert [e.seq for e in row] == list(range(1, len(row) + 1))


def test_normalize_flattens_nested_transactions(build):
    t = build(
        [
            ("T0", "b"),
            ("T0", "b"),
            ("T0", "w", "x"),
            ("T0", "e"),
            ("T0", "e"),
        ]
    )
    ops = [e.op for e in t.events]
    assert ops.count(BEGIN) == 1
    assert ops.count(END) == 1
    assert validate(t).ok


def test_normalize_wraps_orphan_accesses(build):
    t = build([("T0", "w", "x"), ("T1", "r", "x")])
    for tid in (0, 1):
        body = [e.op for e in t.events if e.tid == tid]
        assert body[0] == BEGIN
        assert body[-1] == END
    assert validate(t).ok


def test_normalize_is_idempotent(build):
    t = build(
        [
            ("T0", "b"),
            ("T0", "w", "x"),
            ("T0", "fork", "T1"),
            ("T0", "e"),
            ("T1", "b"),
            ("T1", "r", "x"),
            ("T1", "e"),
        ]
    )
    assert normalize(t) == t


def test_normalize_names_threads_in_first_reference_order():
    b = TraceBuilder()
    b.add("worker", BEGIN)
    b.add("worker", FORK, "late")
    b.add("worker", END)
    b.add("late", BEGIN)
    b.add("late", END)
    t = b.build()
    # the fork references 'late' before it runs, so it takes id 1 there
    assert t.events[1].op == FORK
    assert t.events[1].target == 1
    assert t.k == 2
    assert t.thread_names == ["T0", "T1"]


def test_validate_flags_lock_misuse():
    b = TraceBuilder()
    b.add("T0", BEGIN)
    b.add("T0", ACQUIRE, "l")
    b.add("T1", BEGIN)
    b.add("T1", ACQUIRE, "l")
    b.add("T1", RELEASE, "m")
    b.add("T1", END)
    b.add("T0", END)
    rep = validate(b.raw())
    assert {"acquire-held", "release-unheld"} <= rep.kinds()


def test_validate_flags_unmatched_end():
    b = TraceBuilder()
    b.add("T0", END)
    rep = validate(b.raw())
    assert "end-unmatched" in rep.kinds()


def test_normalize_refuses_unrepairable_defects():
    b = TraceBuilder()
    b.add("T0", BEGIN)
    b.add("T0", RELEASE, "l")
    b.add("T0", END)
    with pytest.raises(NormalizeError) as exc:
        normalize(b.raw())
    assert "release-unheld" in exc.value.report.kinds()


def test_conflicts_same_thread_always():
    a = ev(1, READ, 0)
    b = ev(1, READ, 1, seq=2, pos=2)
    assert conflicts(a, b)


def test_conflicts_variable_needs_a_write():
    r1 = ev(0, READ, 0)
    r2 = ev(1, READ, 0)
    w = ev(2, WRITE, 0)
    assert not conflicts(r1, r2)
    assert conflicts(r1, w)
    assert conflicts(w, r2)
    assert conflicts(w, ev(3, WRITE, 0))


def test_conflicts_locks_pair_on_same_lock():
    a = ev(0, ACQUIRE, 0)
    r = ev(1, RELEASE, 0)
    other = ev(1, ACQUIRE, 1)
    assert conflicts(a, r)
    assert conflicts(a, ev(1, ACQUIRE, 0))
    assert not conflicts(a, other)


def test_conflicts_different_variables_do_not_conflict():
    assert not conflicts(ev(0, WRITE, 0), ev(1, WRITE, 1))


def test_lock_op_does_not_conflict_with_variable_op():
    # target ids collide across namespaces; kinds must keep them apart
    assert not conflicts(ev(0, ACQUIRE, 0), ev(1, WRITE, 0))


def test_per_thread_partition(build):
    t = build(
        [
            ("T0", "b"),
            ("T1", "b"),
            ("T0", "w", "x"),
            ("T1", "r", "x"),
            ("T0", "e"),
            ("T1", "e"),
        ]
    )
    per = t.per_thread()
    assert sorted(e.pos for row in per for e in row) == list(range(1, t.n + 1))
    for tid, row in enumerate(per):
        assert all(e.tid == tid for e in row)


def test_trace_equality_covers_name_tables(build):
    t1 = build([("T0", "b"), ("T0", "w", "x"), ("T0", "e")])
    t2 = build([("T0", "b"), ("T0", "w", "x"), ("T0", "e")])
    assert t1 == t2
    t3 = Trace(
        events=list(t1.events),
        k=t1.k,
        thread_names=t1.thread_names,
        var_names=["y"],
        lock_names=t1.lock_names,
    )
    assert t1 != t3
