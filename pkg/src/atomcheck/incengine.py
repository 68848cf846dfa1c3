"""Streaming increasing-cycle checker.

Same handler structure as the transaction-level checker, but the
clock store is keyed by per-thread event sequence numbers instead of
transaction indices, and the question asked per edge is different: an
edge from event v into event e of transaction T is a violation when
T's begin already reaches v, because then something that happened
after the begin and outside T flows back into T. One transaction gets
the blame.

Edges are recorded backwards only: for each thread, the latest event
known to reach v (or, on v's own thread, the begin of v's
transaction) gets a successor edge to e. That writes at most k store
cells per call, against up to k*k for the transaction-level insert.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .clockstore import ClockStore
from .engine import INC_KIND, Violation
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
    TransactionRef,
)


class IncChecker:
    """Event-level streaming checker. One instance per trace.

    Nodes handed around are (tid, seq, begin_seq) triples: the event's
    thread, its per-thread sequence number, and the sequence number of
    its transaction's begin.
    """

    def __init__(self, k: int, store: Optional[ClockStore] = None):
        self.k = k
        self.store = store if store is not None else ClockStore(k)
        self.begin_seq = [0] * k
        self.cur_txid = [0] * k
        self.txn_count = [0] * k
        self.last_node = [None] * k
        self.started = [False] * k
        self.pending_fork = {}
        self.locs = {}                 # var -> [last_write_node, readers dict tid->node]
        self.locks = {}                # lock -> last release node
        self.ca_calls = 0
        self.max_writes_per_call = 0
        self.violation: Optional[Violation] = None

    def _ca(self, v_node, t2: int, e_seq: int, pos: int) -> bool:
        self.ca_calls += 1
        t1, s1, b1 = v_node
        if t1 == t2:
            return False
        store = self.store
        b2 = self.begin_seq[t2]
        if store.reachable(t2, b2, t1, s1):
            self.violation = Violation(
                kind=INC_KIND,
                pos=pos,
                detecting_tid=t2,
                source=(t1, s1),
                target=(t2, e_seq),
                blamed=TransactionRef(t2, self.cur_txid[t2]),
            )
            return True
        pred = store.predecessor
        add = store.add_successor
        writes = 0
        for t in range(self.k):
            if t == t2:
                continue
            j = b1 if t == t1 else pred(t1, s1, t)
            if j:
                add(t, j, t2, e_seq)
                writes += 1
        if writes > self.max_writes_per_call:
            self.max_writes_per_call = writes
        return False

    def process(self, e) -> bool:
        t = e.tid
        op = e.op
        if op == BEGIN:
            self.txn_count[t] += 1
            self.cur_txid[t] = self.txn_count[t]
            self.begin_seq[t] = e.seq
        seq = e.seq
        node = (t, seq, self.begin_seq[t])
        if not self.started[t]:
            self.started[t] = True
            f = self.pending_fork.pop(t, None)
            if f is not None and self._ca(f, t, seq, e.pos):
                return True

        if op == READ:
            loc = self.locs.get(e.target)
            if loc is None:
                loc = self.locs[e.target] = [None, {}]
            loc[1][t] = node
            w = loc[0]
            if w is not None and self._ca(w, t, seq, e.pos):
                return True
        elif op == WRITE:
            loc = self.locs.get(e.target)
            if loc is None:
                loc = self.locs[e.target] = [None, {}]
            for rnode in loc[1].values():
                if self._ca(rnode, t, seq, e.pos):
                    return True
            w = loc[0]
            loc[0] = node
            loc[1] = {}
            if w is not None and self._ca(w, t, seq, e.pos):
                return True
        elif op == ACQUIRE:
            r = self.locks.get(e.target)
            if r is not None and self._ca(r, t, seq, e.pos):
                return True
        elif op == RELEASE:
            self.locks[e.target] = node
        elif op == FORK:
            self.pending_fork[e.target] = node
        elif op == JOIN:
            c = self.last_node[e.target] if e.target < self.k else None
            if c is not None and self._ca(c, t, seq, e.pos):
                return True

        self.last_node[t] = node
        return False


@dataclass
class IncRun:
    violation: Optional[Violation]
    ca_calls: int
    max_writes_per_call: int
    n: int
    k: int
    checker: IncChecker


def run_inc(trace: Trace, store: Optional[ClockStore] = None) -> IncRun:
    """Run the event-level checker over a trace, halting at the first
    violation."""
    c = IncChecker(trace.k, store)
    for e in trace.events:
        if c.process(e):
            break
    return IncRun(c.violation, c.ca_calls, c.max_writes_per_call, trace.n, trace.k, c)
