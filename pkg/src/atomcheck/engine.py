"""Streaming conflict-serializability checker.

Processes one event at a time and reports the first event whose
prefix is not conflict-serializable. State per thread pair lives in a
ClockStore keyed by per-thread transaction indices; per variable it
keeps the last write and the readers since that write; per lock, the
last release. Fork and join contribute ordering edges like any other
conflict.

The detection rule for an edge from transaction n1 into n2: if n2
already reaches n1, the new edge closes a cycle and the trace is
doomed at exactly this event. Otherwise the edge is recorded together
with its transitive consequences over every thread pair, reading one
predecessor per source thread and one successor per target thread
from the snapshot taken before the first write.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .clockstore import ClockStore
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

CS_KIND = "conflict-serializability"
INC_KIND = "increasing-cycle"


@dataclass(frozen=True)
class Violation:
    """First atomicity violation of a run.

    kind            CS_KIND or INC_KIND
    pos             1-based position of the detecting event
    detecting_tid   thread of the detecting event
    source          node the closing edge leaves: a TransactionRef for
                    the transaction-level checker, a (tid, seq) event
                    ref for the event-level one
    target          node the closing edge enters, same convention
    blamed          transaction held responsible; None for the
                    transaction-level checker, where the whole cycle is
    """

    kind: str
    pos: int
    detecting_tid: int
    source: tuple
    target: tuple
    blamed: Optional[TransactionRef]


class CsChecker:
    """Transaction-level streaming checker. One instance per trace."""

    def __init__(self, k: int, store: Optional[ClockStore] = None):
        self.k = k
        self.store = store if store is not None else ClockStore(k)
        self.cur_txid = [0] * k
        self.txn_count = [0] * k
        self.last_node = [None] * k       # (tid, txid) of last event's transaction
        self.started = [False] * k
        self.pending_fork = {}            # child tid -> (tid, txid) of fork site
        self.locs = {}                    # var -> [last_write_node, readers dict tid->txid]
        self.locks = {}                   # lock -> (tid, txid) of last release
        self.ca_calls = 0
        self.violation: Optional[Violation] = None

    # -- CheckAndUpdate -----------------------------------------------------

    def _ca(self, v_node, t2: int, j2: int, pos: int) -> bool:
        """Account the ordering v_node -> (t2, j2). True if it closes a cycle."""
        self.ca_calls += 1
        t1, j1 = v_node
        if t1 == t2:
            return False
        if self.store.reachable(t2, j2, t1, j1):
            self.violation = Violation(
                kind=CS_KIND,
                pos=pos,
                detecting_tid=t2,
                source=TransactionRef(t1, j1),
                target=TransactionRef(t2, j2),
                blamed=None,
            )
            return True
        self._insert_edge(t1, j1, t2, j2)
        return False

    def _insert_edge(self, t1: int, j1: int, t2: int, j2: int) -> None:
        store = self.store
        k = self.k
        pred = store.predecessor
        succ = store.successor
        # snapshot all lookups before the first write
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
                if ta == tb:
                    continue
                jb = succs[tb]
                if jb:
                    add(ta, ja, tb, jb)

    # -- event handlers -----------------------------------------------------

    def process(self, e) -> bool:
        """Feed one event. True if it raised the run's first violation."""
        t = e.tid
        op = e.op
        if op == BEGIN:
            self.txn_count[t] += 1
            self.cur_txid[t] = self.txn_count[t]
        cur = self.cur_txid[t]
        if not self.started[t]:
            self.started[t] = True
            f = self.pending_fork.pop(t, None)
            if f is not None and self._ca(f, t, cur, e.pos):
                return True

        if op == READ:
            loc = self.locs.get(e.target)
            if loc is None:
                loc = self.locs[e.target] = [None, {}]
            loc[1][t] = cur
            w = loc[0]
            if w is not None and self._ca(w, t, cur, e.pos):
                return True
        elif op == WRITE:
            loc = self.locs.get(e.target)
            if loc is None:
                loc = self.locs[e.target] = [None, {}]
            for rt, rj in loc[1].items():
                if self._ca((rt, rj), t, cur, e.pos):
                    return True
            w = loc[0]
            loc[0] = (t, cur)
            loc[1] = {}
            if w is not None and self._ca(w, t, cur, e.pos):
                return True
        elif op == ACQUIRE:
            r = self.locks.get(e.target)
            if r is not None and self._ca(r, t, cur, e.pos):
                return True
        elif op == RELEASE:
            self.locks[e.target] = (t, cur)
        elif op == FORK:
            self.pending_fork[e.target] = (t, cur)
        elif op == JOIN:
            c = self.last_node[e.target] if e.target < self.k else None
            if c is not None and self._ca(c, t, cur, e.pos):
                return True
        elif op == END:
            self.cur_txid[t] = 0

        self.last_node[t] = (t, cur)
        return False


@dataclass
class CsRun:
    violation: Optional[Violation]
    ca_calls: int
    n: int
    k: int
    checker: CsChecker


def run_cs(trace: Trace, store: Optional[ClockStore] = None) -> CsRun:
    """Run the transaction-level checker over a trace, halting at the
    first violation."""
    c = CsChecker(trace.k, store)
    for e in trace.events:
        if c.process(e):
            break
    return CsRun(c.violation, c.ca_calls, trace.n, trace.k, c)
