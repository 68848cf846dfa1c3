"""Core trace model: events, transactions, validation, normalization.

A trace is a totally ordered sequence of events from k threads. Each
thread's events are grouped into transactions by begin/end markers.
Everything downstream (the streaming checkers, the oracle, the
concurrent monitor) consumes traces in the normalized form produced
here: dense thread ids, contiguous per-thread sequence numbers,
contiguous global positions, every body event inside exactly one
transaction, no nested begin/end pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

# Operation kinds. Plain ints, these sit in very hot loops.
BEGIN = 0
END = 1
READ = 2
WRITE = 3
ACQUIRE = 4
RELEASE = 5
FORK = 6
JOIN = 7

OP_NAMES = ("begin", "end", "read", "write", "acquire", "release", "fork", "join")

# Ops whose target field is meaningful, and what it names.
_VAR_OPS = (READ, WRITE)
_LOCK_OPS = (ACQUIRE, RELEASE)
_THREAD_OPS = (FORK, JOIN)


class TransactionRef(NamedTuple):
    """Identifies one transaction: owning thread and 1-based per-thread index."""

    tid: int
    txid: int


class Event:
    """One trace event.

    tid     dense thread id, 0-based
    seq     1-based index of this event within its thread
    op      one of the operation constants above
    target  variable id (read/write), lock id (acquire/release),
            thread id (fork/join), -1 for begin/end
    pos     1-based global position in the trace
    """

    __slots__ = ("tid", "seq", "op", "target", "pos")

    def __init__(self, tid: int, seq: int, op: int, target: int, pos: int):
        self.tid = tid
        self.seq = seq
        self.op = op
        self.target = target
        self.pos = pos

    def __repr__(self) -> str:
        return f"Event(tid={self.tid}, seq={self.seq}, op={OP_NAMES[self.op]}, target={self.target}, pos={self.pos})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Event):
            return NotImplemented
        return (
            self.tid == other.tid
            and self.seq == other.seq
            and self.op == other.op
            and self.target == other.target
            and self.pos == other.pos
        )

    def __hash__(self) -> int:
        return hash((self.tid, self.seq, self.op, self.target, self.pos))


@dataclass
class Trace:
    """A normalized trace plus the name tables needed to print it back."""

    events: list
    k: int
    thread_names: list
    var_names: list
    lock_names: list

    @property
    def n(self) -> int:
        return len(self.events)

    def per_thread(self) -> list:
        """Events of each thread, in order. Index by tid."""
        streams = [[] for _ in range(self.k)]
        for e in self.events:
            streams[e.tid].append(e)
        return streams

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.events == other.events
            and self.k == other.k
            and self.thread_names == other.thread_names
            and self.var_names == other.var_names
            and self.lock_names == other.lock_names
        )


def conflicts(e1: Event, e2: Event) -> bool:
    """Do two events conflict?

    Same thread, or both lock operations on the same lock, or both
    accesses of the same variable with at least one write.
    """
    if e1.tid == e2.tid:
        return True
    if e1.op in _LOCK_OPS and e2.op in _LOCK_OPS and e1.target == e2.target:
        return True
    if e1.op in _VAR_OPS and e2.op in _VAR_OPS and e1.target == e2.target:
        return e1.op == WRITE or e2.op == WRITE
    return False


class Defect(NamedTuple):
    kind: str
    pos: int
    detail: str


@dataclass
class ValidationReport:
    defects: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.defects

    def kinds(self) -> set:
        return {d.kind for d in self.defects}

    def add(self, kind: str, pos: int, detail: str) -> None:
        self.defects.append(Defect(kind, pos, detail))


# Defects normalize() can repair by rewriting the event stream.
REPAIRABLE = {"nested-begin", "orphan-event", "seq-gap", "pos-gap"}


def validate(trace: Trace) -> ValidationReport:
    """Check structural well-formedness. Defects are data, not exceptions."""
    rep = ValidationReport()
    depth = {}            # tid -> open-transaction nesting depth
    held = {}             # lock id -> tid holding it
    next_seq = {}         # tid -> expected seq
    started = set()       # tids with at least one event seen
    forked = {}           # child tid -> pos of fork
    joined = {}           # child tid -> pos of join

    for i, e in enumerate(trace.events):
        pos = i + 1
        if e.pos != pos:
            rep.add("pos-gap", pos, f"event carries pos {e.pos}, expected {pos}")
        want = next_seq.get(e.tid, 1)
        if e.seq != want:
            rep.add("seq-gap", pos, f"thread {e.tid} seq {e.seq}, expected {want}")
        next_seq[e.tid] = want + 1

        if e.tid in joined:
            rep.add("join-unfinished", pos, f"thread {e.tid} has events after being joined at pos {joined[e.tid]}")

        d = depth.get(e.tid, 0)
        if e.op == BEGIN:
            if d > 0:
                rep.add("nested-begin", pos, f"thread {e.tid} begins at depth {d}")
            depth[e.tid] = d + 1
        elif e.op == END:
            if d == 0:
                rep.add("end-unmatched", pos, f"thread {e.tid} ends with no open transaction")
            else:
                depth[e.tid] = d - 1
        elif e.op == ACQUIRE:
            if d == 0:
                rep.add("orphan-event", pos, f"acquire outside any transaction on thread {e.tid}")
            holder = held.get(e.target)
            if holder is not None:
                rep.add("acquire-held", pos, f"lock {e.target} already held by thread {holder}")
            else:
                held[e.target] = e.tid
        elif e.op == RELEASE:
            if d == 0:
                rep.add("orphan-event", pos, f"release outside any transaction on thread {e.tid}")
            if held.get(e.target) != e.tid:
                rep.add("release-unheld", pos, f"thread {e.tid} releases lock {e.target} it does not hold")
            else:
                del held[e.target]
        elif e.op == FORK:
            if d == 0:
                rep.add("orphan-event", pos, f"fork outside any transaction on thread {e.tid}")
            if e.target == e.tid:
                rep.add("fork-self", pos, f"thread {e.tid} forks itself")
            elif e.target in started:
                rep.add("fork-after-start", pos, f"thread {e.target} already ran before fork")
            elif e.target in forked:
                rep.add("fork-duplicate", pos, f"thread {e.target} forked twice")
            else:
                forked[e.target] = pos
        elif e.op == JOIN:
            if d == 0:
                rep.add("orphan-event", pos, f"join outside any transaction on thread {e.tid}")
            if e.target == e.tid:
                rep.add("join-self", pos, f"thread {e.tid} joins itself")
            else:
                joined.setdefault(e.target, pos)
        else:  # READ / WRITE
            if d == 0:
                rep.add("orphan-event", pos, f"{OP_NAMES[e.op]} outside any transaction on thread {e.tid}")
        started.add(e.tid)

    return rep


class NormalizeError(ValueError):
    """Raised when a trace has defects normalize cannot repair."""

    def __init__(self, report: ValidationReport):
        self.report = report
        kinds = ", ".join(sorted(report.kinds() - REPAIRABLE))
        super().__init__(f"trace has unrepairable defects: {kinds}")


def normalize(trace: Trace) -> Trace:
    """Rewrite a trace into canonical form.

    Nested begin/end pairs collapse to the outermost pair. Body events
    outside any transaction get wrapped in a synthetic unary
    transaction of their own. Thread ids are re-densified by first
    appearance and seq/pos are recomputed. Raises NormalizeError on
    lock or alternation defects, which have no sensible repair.

    Idempotent: normalize(normalize(t)) == normalize(t).
    """
    rep = validate(trace)
    if rep.kinds() - REPAIRABLE:
        raise NormalizeError(rep)

    tid_map = {}        # old tid -> new dense tid
    new_thread_names = []

    def dense(old_tid: int) -> int:
        t = tid_map.get(old_tid)
        if t is None:
            t = len(tid_map)
            tid_map[old_tid] = t
            new_thread_names.append(f"T{t}")
        return t

    out = []
    seq = []            # per new tid
    depth = {}          # old tid -> depth

    def emit(tid: int, op: int, target: int) -> None:
        while tid >= len(seq):
            seq.append(0)
        seq[tid] += 1
        out.append(Event(tid, seq[tid], op, target, len(out) + 1))

    # Fork/join targets are thread ids and must go through the same
    # densification. A forked thread may have no events of its own yet,
    # so the mapping can be created by the fork itself.
    for e in trace.events:
        t = dense(e.tid)
        d = depth.get(e.tid, 0)
        if e.op == BEGIN:
            depth[e.tid] = d + 1
            if d == 0:
                emit(t, BEGIN, -1)
        elif e.op == END:
            depth[e.tid] = d - 1
            if d == 1:
                emit(t, END, -1)
        else:
            target = e.target
            if e.op in _THREAD_OPS:
                target = dense(e.target)
            if d == 0:
                emit(t, BEGIN, -1)
                emit(t, e.op, target)
                emit(t, END, -1)
            else:
                emit(t, e.op, target)

    return Trace(
        events=out,
        k=len(tid_map),
        thread_names=new_thread_names,
        var_names=list(trace.var_names),
        lock_names=list(trace.lock_names),
    )


class TraceBuilder:
    """Assemble a trace from (thread, op, operand-name) steps, then normalize.

    Interns thread, variable, and lock names in first-appearance order.
    The generators and tests use this to build traces without a text
    round trip.
    """

    def __init__(self):
        self._threads = {}
        self._vars = {}
        self._locks = {}
        self._thread_names = []
        self._var_names = []
        self._lock_names = []
        self._events = []
        self._seq = []

    def _intern(self, table: dict, names: list, name) -> int:
        i = table.get(name)
        if i is None:
            i = len(table)
            table[name] = i
            names.append(str(name))
        return i

    def thread(self, name) -> int:
        return self._intern(self._threads, self._thread_names, name)

    def add(self, thread_name, op: int, operand=None) -> None:
        t = self.thread(thread_name)
        if op in _VAR_OPS:
            target = self._intern(self._vars, self._var_names, operand)
        elif op in _LOCK_OPS:
            target = self._intern(self._locks, self._lock_names, operand)
        elif op in _THREAD_OPS:
            target = self.thread(operand)
        else:
            target = -1
        while t >= len(self._seq):
            self._seq.append(0)
        self._seq[t] += 1
        self._events.append(Event(t, self._seq[t], op, target, len(self._events) + 1))

    def raw(self) -> Trace:
        """The trace as built, before normalization."""
        return Trace(
            events=self._events,
            k=len(self._threads),
            thread_names=self._thread_names,
            var_names=self._var_names,
            lock_names=self._lock_names,
        )

    def build(self) -> Trace:
        return normalize(self.raw())
