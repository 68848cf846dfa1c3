"""Concurrent monitor: the transaction-level checker under real threads.

Each monitored thread submits its own events. Shared state splits into
rows of the clock store (row t is every entry indexed [t][*]), guarded
by one reader-writer token per row plus a global guard token:

* fast path: take the guard shared, read tokens on the source rows of
  the event's pending edges (ascending), then try-write the
  submitter's own row; on failure release everything, yield, retry.
  Inside that tenure every pending edge is queried and, if no cycle,
  recorded backwards: one predecessor per thread gets a successor
  edge into the submitter's open transaction. Backward recording is
  complete only while the target transaction has no outgoing edges.

* slow path: when the submitter's open transaction already has an
  outgoing edge (has_out_edge), drop to the guard exclusive plus
  every row token exclusive and redo the event with the full
  all-pairs insert.

A per-location mutex serializes bookkeeping for events on the same
variable or lock, and a global ticket taken inside the tenure fixes
the event's position in the realized order. Any two events that touch
overlapping state hold a common token across both their tickets and
their effects, so the ticket order is a legal serialization: replaying
the realized trace through the offline checker gives the same verdict
at the same position. Disjoint events genuinely run in parallel.

The exclusion discipline (writes to row t only under t's token or the
guard exclusive; cross-row reads only under a matching token) is
checked dynamically when the monitor is built with discipline=True.
"""

from __future__ import annotations

import random
import sys
import threading
import time
from dataclasses import dataclass
from threading import get_ident
from typing import Optional

from .clockstore import ClockStore
from .engine import CS_KIND, Violation
from .model import (
    ACQUIRE,
    BEGIN,
    END,
    FORK,
    JOIN,
    READ,
    RELEASE,
    WRITE,
    Trace,
    TraceBuilder,
    TransactionRef,
)

_SPIN_YIELD = 16            # failed write tries before sleeping
_SPIN_SLEEP = 0.00005


class RWToken:
    """Reader-writer token with a non-blocking write attempt.

    Writer preference: pending blocking writers stall new readers, so
    the slow path cannot starve. Holder identities are tracked for the
    discipline checker.
    """

    __slots__ = ("_cond", "readers", "writer", "_writers_waiting")

    def __init__(self):
        self._cond = threading.Condition(threading.Lock())
        self.readers = {}           # ident -> hold count
        self.writer = None          # ident
        self._writers_waiting = 0

    def acquire_read(self):
        me = get_ident()
        with self._cond:
            while self.writer is not None or self._writers_waiting:
                self._cond.wait()
            self.readers[me] = self.readers.get(me, 0) + 1

    def release_read(self):
        me = get_ident()
        with self._cond:
            c = self.readers.get(me, 0)
            if c <= 1:
                self.readers.pop(me, None)
            else:
                self.readers[me] = c - 1
            if not self.readers:
                self._cond.notify_all()

    def try_acquire_write(self) -> bool:
        me = get_ident()
        with self._cond:
            if self.writer is None and not self.readers:
                self.writer = me
                return True
            return False

    def acquire_write(self):
        me = get_ident()
        with self._cond:
            self._writers_waiting += 1
            try:
                while self.writer is not None or self.readers:
                    self._cond.wait()
                self.writer = me
            finally:
                self._writers_waiting -= 1

    def release_write(self):
        with self._cond:
            self.writer = None
            self._cond.notify_all()

    # exact for the asking thread itself
    def held_read_by(self, ident) -> bool:
        return ident in self.readers

    def held_write_by(self, ident) -> bool:
        return self.writer == ident


class _GuardedStore(ClockStore):
    """ClockStore that checks the exclusion discipline on every access."""

    __slots__ = ("mon",)

    def __init__(self, k: int, mon: "SharedMonitor"):
        super().__init__(k)
        self.mon = mon

    def _read_ok(self, row: int) -> None:
        mon = self.mon
        me = get_ident()
        tok = mon.row_tokens[row]
        if me in tok.readers or tok.writer == me or mon.guard.writer == me:
            return
        mon._discipline_breach(f"read of row {row} without a token")

    def _write_ok(self, row: int) -> None:
        mon = self.mon
        me = get_ident()
        if mon.row_tokens[row].writer == me or mon.guard.writer == me:
            return
        mon._discipline_breach(f"write of row {row} without exclusive token")

    def successor(self, t1, j1, t2):
        self._read_ok(t2)
        return super().successor(t1, j1, t2)

    def predecessor(self, t1, j1, t2):
        self._read_ok(t1)
        return super().predecessor(t1, j1, t2)

    def reachable(self, t1, j1, t2, j2):
        if t1 != t2:
            self._read_ok(t2)
        return super().reachable(t1, j1, t2, j2)

    def add_successor(self, t1, j1, t2, j2):
        self._write_ok(t2)
        return super().add_successor(t1, j1, t2, j2)


class MonitorError(RuntimeError):
    pass


class SharedMonitor:
    """Thread-safe transaction-level checker. One instance per run."""

    def __init__(self, k: int, discipline: bool = False):
        self.k = k
        self.store = _GuardedStore(k, self) if discipline else ClockStore(k)
        self.row_tokens = [RWToken() for _ in range(k)]
        self.guard = RWToken()
        self._ticket_lock = threading.Lock()
        self.tickets = 0
        self.realized = []              # events in ticket order
        self._loc_master = threading.Lock()
        self._var_locks = {}
        self._lock_locks = {}
        # registry (GIL-atomic scalars, each slot written by one side only)
        self.cur_txid = [0] * k
        self.txn_count = [0] * k
        self.body_counts = [[] for _ in range(k)]   # per txn body-event tallies
        self.has_out_edge = [False] * k
        self.last_node = [None] * k
        self.started = [False] * k
        self.pending_fork = {}
        self.locs = {}
        self.locks_state = {}
        # outcome and stats
        self.violation: Optional[Violation] = None
        self._violation_tick = None
        self._violation_lock = threading.Lock()
        self.halted = False
        self.ca_calls = 0
        self.slow_paths = 0
        self.total_spins = 0
        self.discipline_violations = 0
        self.discipline_notes = []

    # -- plumbing -----------------------------------------------------------

    def _discipline_breach(self, note: str) -> None:
        self.discipline_violations += 1
        if len(self.discipline_notes) < 16:
            self.discipline_notes.append(note)

    def _loc_lock(self, e) -> Optional[threading.Lock]:
        if e.op in (READ, WRITE):
            table = self._var_locks
        elif e.op in (ACQUIRE, RELEASE):
            table = self._lock_locks
        else:
            return None
        lock = table.get(e.target)
        if lock is None:
            with self._loc_master:
                lock = table.setdefault(e.target, threading.Lock())
        return lock

    def _tick(self, e) -> int:
        with self._ticket_lock:
            self.tickets += 1
            self.realized.append(e)
            return self.tickets

    def _fire(self, e, t1: int, j1: int, t2: int, j2: int) -> Violation:
        tick = self._tick(e)
        v = Violation(
            kind=CS_KIND,
            pos=tick,
            detecting_tid=t2,
            source=TransactionRef(t1, j1),
            target=TransactionRef(t2, j2),
            blamed=None,
        )
        with self._violation_lock:
            if self._violation_tick is None or tick < self._violation_tick:
                self._violation_tick = tick
                self.violation = v
        self.halted = True
        return v

    def _unary(self, t1: int, j1: int) -> bool:
        # open transactions are never treated as unary; a closed one is
        # unary when it held exactly one body event
        if self.cur_txid[t1] == j1:
            return False
        counts = self.body_counts[t1]
        return j1 <= len(counts) and counts[j1 - 1] == 1

    def _note_out_edge(self, t1: int, j1: int) -> None:
        if self.txn_count[t1] == j1 and not self._unary(t1, j1):
            self.has_out_edge[t1] = True

    # -- the two insert flavors (tokens already held by caller) -------------

    def _insert_backwards_held(self, t1: int, j1: int, t2: int, j2: int) -> None:
        store = self.store
        pred = store.predecessor
        add = store.add_successor
        for t in range(self.k):
            if t == t2:
                continue
            j = j1 if t == t1 else pred(t1, j1, t)
            if j:
                add(t, j, t2, j2)

    def _insert_full_held(self, t1: int, j1: int, t2: int, j2: int) -> None:
        store = self.store
        k = self.k
        pred = store.predecessor
        succ = store.successor
        preds = [0] * k
        succs = [0] * k
        for t in range(k):
            preds[t] = j1 if t == t1 else pred(t1, j1, t)
            succs[t] = j2 if t == t2 else succ(t2, j2, t)
        add = store.add_successor
        for ta in range(k):
            ja = preds[ta]
            if not ja:
                continue
            for tb in range(k):
                if ta != tb:
                    jb = succs[tb]
                    if jb:
                        add(ta, ja, tb, jb)

    # -- public single operations (acquire their own tokens) ----------------

    def query(self, t1: int, j1: int, t2: int, j2: int) -> bool:
        """Is (t1, j1) ordered before (t2, j2)? Takes the read token of
        the row it reads; same-thread queries touch no shared state."""
        if t1 == t2:
            return j1 <= j2
        tok = self.row_tokens[t2]
        tok.acquire_read()
        try:
            return self.store.reachable(t1, j1, t2, j2)
        finally:
            tok.release_read()

    def insert_edge_backwards(self, t1: int, j1: int, t2: int, j2: int) -> bool:
        """Record (t1, j1) -> (t2, j2) backwards under the fast-path
        tokens. Returns False when the target transaction already has
        an outgoing edge and the caller must escalate."""
        self.guard.acquire_read()
        spins = 0
        try:
            while True:
                self.row_tokens[t1].acquire_read()
                if self.row_tokens[t2].try_acquire_write():
                    break
                self.row_tokens[t1].release_read()
                spins += 1
                if spins % _SPIN_YIELD == 0:
                    time.sleep(_SPIN_SLEEP)
                else:
                    time.sleep(0)
            self.total_spins += spins
            try:
                if self.has_out_edge[t2]:
                    return False
                self._insert_backwards_held(t1, j1, t2, j2)
                self._note_out_edge(t1, j1)
                return True
            finally:
                self.row_tokens[t2].release_write()
                self.row_tokens[t1].release_read()
        finally:
            self.guard.release_read()

    def insert_edge_concurrent(self, t1: int, j1: int, t2: int, j2: int) -> None:
        """Record an edge with the full all-pairs insert under the guard
        exclusive and every row token exclusive: the escalation path."""
        self.guard.acquire_write()
        for tok in self.row_tokens:
            tok.acquire_write()
        try:
            self.slow_paths += 1
            self._insert_full_held(t1, j1, t2, j2)
            self._note_out_edge(t1, j1)
        finally:
            for tok in reversed(self.row_tokens):
                tok.release_write()
            self.guard.release_write()

    # -- event submission ----------------------------------------------------

    def submit(self, e) -> Optional[Violation]:
        """Feed one event on behalf of its thread. Returns the violation
        if this event closed the first cycle. Callers must submit each
        thread's events in order, from one OS thread at a time."""
        if self.halted:
            return None
        t = e.tid
        op = e.op

        if op == BEGIN:
            self.txn_count[t] += 1
            self.body_counts[t].append(0)
            cur = self.txn_count[t]
            self.cur_txid[t] = cur
            self.has_out_edge[t] = False
            ca = self._fork_hook(t)
            if ca:
                v = self._run_tenure(e, ca, t, cur)
                if v is not None:
                    return v
            else:
                self._tick(e)
            self.last_node[t] = (t, cur)
            return None
        if op == END:
            cur = self.cur_txid[t]
            self.has_out_edge[t] = False
            self.cur_txid[t] = 0
            self._tick(e)
            self.last_node[t] = (t, cur)
            return None

        cur = self.cur_txid[t]
        ca = self._fork_hook(t)

        if op == FORK:
            self.pending_fork[e.target] = (t, cur)
            v = self._finish_plain(e, t, cur, ca)
            self.last_node[t] = (t, cur)
            return v
        if op == JOIN:
            c = self.last_node[e.target]
            if c is not None:
                ca.append(c)
            v = self._finish_plain(e, t, cur, ca)
            self.last_node[t] = (t, cur)
            return v

        loc_lock = self._loc_lock(e)
        with loc_lock:
            self.body_counts[t][cur - 1] += 1
            if op == READ:
                loc = self.locs.get(e.target)
                if loc is None:
                    loc = self.locs[e.target] = [None, {}]
                loc[1][t] = cur
                if loc[0] is not None:
                    ca.append(loc[0])
            elif op == WRITE:
                loc = self.locs.get(e.target)
                if loc is None:
                    loc = self.locs[e.target] = [None, {}]
                for rt, rj in loc[1].items():
                    ca.append((rt, rj))
                if loc[0] is not None:
                    ca.append(loc[0])
                loc[0] = (t, cur)
                loc[1] = {}
            elif op == ACQUIRE:
                r = self.locks_state.get(e.target)
                if r is not None:
                    ca.append(r)
            elif op == RELEASE:
                self.locks_state[e.target] = (t, cur)
            v = self._run_tenure(e, ca, t, cur)
        self.last_node[t] = (t, cur)
        return v

    def _finish_plain(self, e, t: int, cur: int, ca: list) -> Optional[Violation]:
        if ca:
            return self._run_tenure(e, ca, t, cur)
        self._tick(e)
        return None

    def _fork_hook(self, t: int) -> list:
        ca = []
        if not self.started[t]:
            self.started[t] = True
            f = self.pending_fork.pop(t, None)
            if f is not None:
                ca.append(f)
        return ca

    def _run_tenure(self, e, ca: list, t2: int, j2: int) -> Optional[Violation]:
        """Query and record every pending edge of one event inside a
        single token tenure, then take the event's ticket."""
        self.ca_calls += len(ca)
        pairs = [v for v in ca if v[0] != t2]
        if not pairs:
            self._tick(e)
            return None
        src_rows = sorted({v[0] for v in pairs})
        guard = self.guard
        tokens = self.row_tokens
        own = tokens[t2]

        spins = 0
        guard.acquire_read()
        while True:
            for r in src_rows:
                tokens[r].acquire_read()
            if own.try_acquire_write():
                break
            for r in reversed(src_rows):
                tokens[r].release_read()
            if self.halted:
                guard.release_read()
                self.total_spins += spins
                return None
            spins += 1
            if spins % _SPIN_YIELD == 0:
                time.sleep(_SPIN_SLEEP)
            else:
                time.sleep(0)
        self.total_spins += spins

        slow = self.has_out_edge[t2]
        if not slow:
            try:
                store = self.store
                for (t1, j1) in pairs:
                    if store.reachable(t2, j2, t1, j1):
                        return self._fire(e, t1, j1, t2, j2)
                    self._insert_backwards_held(t1, j1, t2, j2)
                    self._note_out_edge(t1, j1)
                self._tick(e)
                return None
            finally:
                own.release_write()
                for r in reversed(src_rows):
                    tokens[r].release_read()
                guard.release_read()

        # escalate: redo the whole event under the guard exclusive
        own.release_write()
        for r in reversed(src_rows):
            tokens[r].release_read()
        guard.release_read()

        guard.acquire_write()
        for tok in tokens:
            tok.acquire_write()
        try:
            self.slow_paths += 1
            store = self.store
            for (t1, j1) in pairs:
                if store.reachable(t2, j2, t1, j1):
                    return self._fire(e, t1, j1, t2, j2)
                self._insert_full_held(t1, j1, t2, j2)
                self._note_out_edge(t1, j1)
            self._tick(e)
            return None
        finally:
            for tok in reversed(tokens):
                tok.release_write()
            guard.release_write()


# ---------------------------------------------------------------------------
# stress replay
# ---------------------------------------------------------------------------

SEQUENCED = "sequenced"
FREE = "free"


@dataclass
class ReplayReport:
    mode: str
    violation: Optional[Violation]
    realized: Trace
    orig_tid_of: list               # realized tid -> original tid
    n_submitted: int
    slow_paths: int
    total_spins: int
    ca_calls: int
    discipline_violations: int
    discipline_notes: list
    deadlock_suspected: bool
    elapsed_ms: float
    store_entries: int


class _Turnstile:
    """Admits submissions in exact trace order."""

    def __init__(self):
        self._cond = threading.Condition(threading.Lock())
        self._next = 1
        self.abort = False

    def pass_through(self, pos: int, submit) -> bool:
        with self._cond:
            while self._next != pos and not self.abort:
                self._cond.wait(0.05)
            if self.abort:
                return False
            try:
                submit()
            finally:
                self._next = pos + 1
                self._cond.notify_all()
            return True


class _LockGate:
    """Keeps the realized order lock-valid in free mode: an acquire is
    admitted only while nobody holds the lock in the realized order.

    An acquire with no matching release in the input (the thread ends
    inside the critical section) is admitted only after every paired
    acquire of that lock has released, otherwise the dying holder would
    strand the remaining waiters. Waiters also drain when the monitor
    halts, since the halted holder may stop short of its release."""

    def __init__(self, stop, pair_counts):
        self._cond = threading.Condition(threading.Lock())
        self._held = set()
        self._stop = stop
        self._pairs_left = dict(pair_counts)    # lock id -> releases to come
        self.abort = False

    def _blocked(self, lock_id: int, dangling: bool) -> bool:
        if lock_id in self._held:
            return True
        return dangling and self._pairs_left.get(lock_id, 0) > 0

    def before_acquire(self, lock_id: int, dangling: bool) -> bool:
        with self._cond:
            while self._blocked(lock_id, dangling) and not self.abort and not self._stop():
                self._cond.wait(0.05)
            if self.abort or self._stop():
                return False
            self._held.add(lock_id)
            return True

    def after_release(self, lock_id: int) -> None:
        with self._cond:
            self._held.discard(lock_id)
            n = self._pairs_left.get(lock_id)
            if n:
                self._pairs_left[lock_id] = n - 1
            self._cond.notify_all()


def _rebuild_realized(trace: Trace, events: list) -> tuple:
    b = TraceBuilder()
    for e in events:
        if e.op in (READ, WRITE):
            b.add(f"T{e.tid}", e.op, trace.var_names[e.target])
        elif e.op in (ACQUIRE, RELEASE):
            b.add(f"T{e.tid}", e.op, trace.lock_names[e.target])
        elif e.op in (FORK, JOIN):
            b.add(f"T{e.tid}", e.op, f"T{e.target}")
        else:
            b.add(f"T{e.tid}", e.op)
    realized = b.build()
    # normalizing renames threads to T0.. in first-reference order, so
    # recover the realized-id -> input-id map from the raw sequence with
    # the same reference rule (event thread first, then fork/join target)
    orig_tid_of = []
    seen = set()

    def ref(tid: int) -> None:
        if tid not in seen:
            seen.add(tid)
            orig_tid_of.append(tid)

    for e in events:
        ref(e.tid)
        if e.op in (FORK, JOIN):
            ref(e.target)
    return realized, orig_tid_of


def stress_replay(
    trace: Trace,
    mode: str = SEQUENCED,
    workers: Optional[int] = None,
    timeout: float = 10.0,
    discipline: bool = True,
    jitter_seed: Optional[int] = None,
) -> ReplayReport:
    """Replay a trace through the monitor with one OS thread per trace
    thread, either admitted in exact trace order (sequenced) or racing
    freely with only per-thread order and lock validity enforced
    (free). Returns the monitor verdict plus the realized trace.
    """
    if mode not in (SEQUENCED, FREE):
        raise ValueError(f"mode must be {SEQUENCED!r} or {FREE!r}")
    if workers is not None and workers != trace.k:
        raise ValueError("replay runs one worker per trace thread")
    for e in trace.events:
        if e.op in (FORK, JOIN) and mode == FREE:
            raise ValueError("free replay does not support fork/join traces")

    mon = SharedMonitor(trace.k, discipline=discipline)
    streams = trace.per_thread()
    turnstile = _Turnstile() if mode == SEQUENCED else None
    gate = None
    dangling_pos = set()
    if mode == FREE:
        open_acq = {}                   # lock id -> pos of unreleased acquire
        pair_counts = {}
        for e in trace.events:
            if e.op == ACQUIRE:
                open_acq[e.target] = e.pos
            elif e.op == RELEASE and e.target in open_acq:
                del open_acq[e.target]
                pair_counts[e.target] = pair_counts.get(e.target, 0) + 1
        dangling_pos = set(open_acq.values())
        gate = _LockGate(lambda: mon.halted, pair_counts)
    errors = []

    def worker(tid: int):
        rng = random.Random(None if jitter_seed is None else jitter_seed ^ tid)
        try:
            for e in streams[tid]:
                if turnstile is not None:
                    # keep feeding the turnstile after a halt: skipping a
                    # position would strand every later waiter
                    if not turnstile.pass_through(e.pos, lambda ev=e: mon.submit(ev)):
                        break
                elif mon.halted:
                    break
                else:
                    if e.op == ACQUIRE:
                        if not gate.before_acquire(e.target, e.pos in dangling_pos):
                            break
                        mon.submit(e)
                    elif e.op == RELEASE:
                        mon.submit(e)
                        gate.after_release(e.target)
                    else:
                        mon.submit(e)
                    if rng.random() < 0.002:
                        time.sleep(0)
        except Exception as exc:     # pragma: no cover - protocol bug guard
            errors.append(exc)
            if turnstile is not None:
                turnstile.abort = True
            if gate is not None:
                gate.abort = True

    old_interval = None
    if mode == FREE:
        old_interval = sys.getswitchinterval()
        sys.setswitchinterval(1e-5)
    start = time.perf_counter()
    threads = [threading.Thread(target=worker, args=(t,), daemon=True) for t in range(trace.k)]
    for th in threads:
        th.start()
    deadline = start + timeout
    deadlock = False
    for th in threads:
        th.join(max(0.0, deadline - time.perf_counter()))
        if th.is_alive():
            deadlock = True
    if deadlock:
        if turnstile is not None:
            turnstile.abort = True
        if gate is not None:
            gate.abort = True
        mon.halted = True
        for th in threads:
            th.join(1.0)
    elapsed = (time.perf_counter() - start) * 1000.0
    if old_interval is not None:
        sys.setswitchinterval(old_interval)
    if errors:
        raise MonitorError(f"replay worker failed: {errors[0]!r}") from errors[0]

    realized, orig_tid_of = _rebuild_realized(trace, mon.realized)
    return ReplayReport(
        mode=mode,
        violation=mon.violation,
        realized=realized,
        orig_tid_of=orig_tid_of,
        n_submitted=len(mon.realized),
        slow_paths=mon.slow_paths,
        total_spins=mon.total_spins,
        ca_calls=mon.ca_calls,
        discipline_violations=mon.discipline_violations,
        discipline_notes=list(mon.discipline_notes),
        deadlock_suspected=deadlock,
        elapsed_ms=elapsed,
        store_entries=mon.store.entry_count(),
    )
