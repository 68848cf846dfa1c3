"""Reference decision procedures, built directly from the definitions.

Two independent layers:

* The primary oracles keep an explicit transitive closure over an
  explicit graph, grown edge by edge in trace order. Conflict edges
  are enumerated definitionally (per-variable write chains and
  read sets, per-lock operation chains, per-thread program order,
  fork/join). Because prefix graphs are nested, the first prefix
  whose graph has a cycle is exactly the event whose edges first
  close one. Closures are bitmasks, one bit per transaction (or per
  event for the event-level oracle). No engine data structures, no
  clock tricks.

* A slow layer rebuilds the graph from scratch for every prefix and
  decides cycles by Kahn peeling (transaction level) or brute
  reachability (event level). It exists to cross-check the primary
  oracles on small inputs and is quadratic to cubic on purpose.

The checkers in engine.py and incengine.py never share code with
this module; differential tests compare the two routes.
"""

from __future__ import annotations

from typing import Optional

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
    conflicts,
)


def _bits(m: int):
    """Indices of set bits, ascending."""
    while m:
        lsb = m & -m
        yield lsb.bit_length() - 1
        m ^= lsb


# ---------------------------------------------------------------------------
# definitional edge generation (event level)
# ---------------------------------------------------------------------------

def _gen_edges(trace: Trace):
    """Yield (event_list, per-event in-edge source index lists).

    For each event index i, sources[i] is the list of earlier event
    indices j such that the edge j -> i is in the generating set of
    the conflict order: previous same-thread event, fork/join edges,
    last write before a read, readers-since-last-write and last write
    before a write, previous operation on the same lock. The
    transitive closure of these equals the closure of all conflicting
    pairs.
    """
    events = trace.events
    last_of_thread = {}
    last_write = {}
    readers = {}            # var -> list of reader event indices since last write
    last_lock_op = {}
    pending_fork = {}       # child tid -> fork event index
    first_seen = set()

    sources = []
    for i, e in enumerate(events):
        src = []
        if e.tid not in first_seen:
            first_seen.add(e.tid)
            f = pending_fork.pop(e.tid, None)
            if f is not None:
                src.append(f)
        p = last_of_thread.get(e.tid)
        if p is not None:
            src.append(p)
        op = e.op
        if op == READ:
            w = last_write.get(e.target)
            if w is not None:
                src.append(w)
            readers.setdefault(e.target, []).append(i)
        elif op == WRITE:
            for r in readers.get(e.target, ()):
                src.append(r)
            w = last_write.get(e.target)
            if w is not None:
                src.append(w)
            last_write[e.target] = i
            readers[e.target] = []
        elif op in (ACQUIRE, RELEASE):
            p = last_lock_op.get(e.target)
            if p is not None:
                src.append(p)
            last_lock_op[e.target] = i
        elif op == FORK:
            pending_fork[e.target] = i
        elif op == JOIN:
            p = last_of_thread.get(e.target)
            if p is not None:
                src.append(p)
        last_of_thread[e.tid] = i
        sources.append(src)
    return sources


def _txn_of_events(trace: Trace):
    """Map each event index to a global transaction index.

    Returns (etxn, refs) where refs[g] is the TransactionRef of global
    transaction g, in begin order. Assumes a normalized trace.
    """
    etxn = []
    refs = []
    cur = {}            # tid -> gidx
    counts = {}         # tid -> txns so far
    for e in trace.events:
        if e.op == BEGIN:
            counts[e.tid] = counts.get(e.tid, 0) + 1
            cur[e.tid] = len(refs)
            refs.append(TransactionRef(e.tid, counts[e.tid]))
        g = cur.get(e.tid)
        if g is None:
            raise ValueError(f"event at pos {e.pos} outside any transaction; normalize first")
        etxn.append(g)
        if e.op == END:
            del cur[e.tid]
    return etxn, refs


# ---------------------------------------------------------------------------
# transaction-level closure (primary)
# ---------------------------------------------------------------------------

class _TxnClosure:
    """Incremental strict transitive closure over the lifted transaction graph."""

    def __init__(self, trace: Trace):
        self.trace = trace
        self.sources = _gen_edges(trace)
        self.etxn, self.refs = _txn_of_events(trace)
        m = len(self.refs)
        self.anc = [0] * m
        self.desc = [0] * m
        self.thread_mask = {}       # tid -> mask over gidx
        self.latest = {}            # tid -> gidx of latest txn
        self.closed = set()
        self.cycle_at = None        # pos of first cycle-closing event
        self._next = 0

    def advance(self) -> bool:
        """Process one more event. Returns False when exhausted or after a cycle."""
        i = self._next
        events = self.trace.events
        if self.cycle_at is not None or i >= len(events):
            return False
        self._next = i + 1
        e = events[i]
        b = self.etxn[i]
        if e.op == BEGIN:
            self.thread_mask[e.tid] = self.thread_mask.get(e.tid, 0) | (1 << b)
            self.latest[e.tid] = b
        elif e.op == END:
            self.closed.add(b)
        anc = self.anc
        desc = self.desc
        for j in self.sources[i]:
            a = self.etxn[j]
            if a == b:
                continue
            if (desc[b] >> a) & 1:
                self.cycle_at = e.pos
                return False
            if (desc[a] >> b) & 1:
                continue
            anc_a = anc[a] | (1 << a)
            desc_b = desc[b] | (1 << b)
            for x in _bits(anc_a):
                desc[x] |= desc_b
            for y in _bits(desc_b):
                anc[y] |= anc_a
        return True

    def run(self) -> Optional[int]:
        while self.advance():
            pass
        return self.cycle_at


def first_cs_violation(trace: Trace) -> Optional[int]:
    """Position of the first event whose prefix is not conflict-serializable.

    A prefix is serializable exactly when its lifted transaction graph
    is acyclic, so this is the position of the event whose conflict
    edges first close a cycle. None if the whole trace is clean.
    """
    return _TxnClosure(trace).run()


class TxnOrderOracle:
    """Prefix-by-prefix queries over the transaction order.

    advance() consumes the next event; lrt_ert() answers from the
    definitions: the latest transaction of t2 ordered before t1's
    latest transaction, and the earliest transaction of t1 the former
    is ordered before.
    """

    def __init__(self, trace: Trace):
        self._c = _TxnClosure(trace)

    def advance(self) -> bool:
        return self._c.advance()

    @property
    def cycle_at(self) -> Optional[int]:
        return self._c.cycle_at

    def txn_gidx(self, ref: TransactionRef) -> int:
        return self._c.refs.index(ref)

    def ordered(self, a: TransactionRef, b: TransactionRef) -> bool:
        """Strict transaction order between distinct transactions."""
        c = self._c
        ga = c.refs.index(a)
        gb = c.refs.index(b)
        return bool((c.desc[ga] >> gb) & 1)

    def lrt_ert(self, t1: int, t2: int):
        """Returns (lrt, ert, lrt_open) for observer thread t1 and remote t2."""
        c = self._c
        latest = c.latest.get(t1)
        if latest is None:
            return None, None, False
        cand = c.anc[latest] & c.thread_mask.get(t2, 0)
        if not cand:
            return None, None, False
        g = cand.bit_length() - 1
        lrt = c.refs[g]
        aware = c.desc[g] & c.thread_mask.get(t1, 0)
        lsb = aware & -aware
        ert = c.refs[lsb.bit_length() - 1] if lsb else None
        return lrt, ert, g not in c.closed


def lrt_ert(trace: Trace, t1: int, t2: int, upto: Optional[int] = None):
    """One-shot lrt/ert on the prefix of the first `upto` events (default all)."""
    o = TxnOrderOracle(trace)
    limit = trace.n if upto is None else upto
    for _ in range(limit):
        if not o.advance():
            break
    return o.lrt_ert(t1, t2)


# ---------------------------------------------------------------------------
# event-level closure and the increasing-cycle oracle (primary)
# ---------------------------------------------------------------------------

class ChbIndex:
    """Event-level conflict order for one whole trace.

    anc[i] is the bitmask of event indices ordered at-or-before event
    i, self included.
    """

    def __init__(self, trace: Trace):
        self.trace = trace
        sources = _gen_edges(trace)
        anc = []
        for i in range(trace.n):
            m = 1 << i
            for j in sources[i]:
                m |= anc[j]
            anc.append(m)
        self.anc = anc

    def ordered(self, p1: int, p2: int, strict: bool = False) -> bool:
        """Is the event at position p1 conflict-ordered before the one at p2?

        Reflexive by default; strict=True excludes equality.
        """
        if p1 == p2:
            return not strict
        return bool((self.anc[p2 - 1] >> (p1 - 1)) & 1)


def chb_ordered(trace: Trace, p1: int, p2: int, strict: bool = False) -> bool:
    return ChbIndex(trace).ordered(p1, p2, strict)


def first_inc_violation(trace: Trace):
    """First increasing cycle: (position, blamed TransactionRef), or None.

    A transaction T is blamed at event e in T when some event outside
    T sits conflict-ordered between T's begin and e. Detection is at
    the first such e, matching the streaming checker's report point.
    """
    sources = _gen_edges(trace)
    etxn, refs = _txn_of_events(trace)
    events = trace.events
    anc = []
    # per open transaction, by tid: [begin_idx, member_mask, watch_mask]
    open_txn = {}
    for i, e in enumerate(events):
        m = 1 << i
        for j in sources[i]:
            m |= anc[j]
        anc.append(m)
        if e.op == BEGIN:
            open_txn[e.tid] = [i, 0, 0]
        own = open_txn.get(e.tid)
        if own is not None:
            own[1] |= 1 << i
        for rec in open_txn.values():
            if (m >> rec[0]) & 1:
                rec[2] |= 1 << i
        if own is not None and (m & own[2] & ~own[1]):
            return e.pos, refs[etxn[i]]
        if e.op == END:
            del open_txn[e.tid]
    return None


# ---------------------------------------------------------------------------
# slow layer: per-prefix rebuilds from all conflicting pairs
# ---------------------------------------------------------------------------

class ThbGraph:
    """Explicit transaction graph of one trace (or prefix), fully rebuilt.

    Edges lift every conflicting event pair (plus fork/join order)
    between distinct transactions. Cycle testing is Kahn peeling, a
    different algorithm from the closure the primary oracle uses.
    """

    def __init__(self, nodes, edges):
        self.nodes = nodes          # list of TransactionRef
        self.edges = edges          # set of (TransactionRef, TransactionRef)

    @classmethod
    def from_trace(cls, trace: Trace, upto: Optional[int] = None) -> "ThbGraph":
        limit = trace.n if upto is None else upto
        events = trace.events[:limit]
        etxn, refs = _txn_of_events(trace)
        edges = set()
        for i in range(len(events)):
            for j in range(i):
                if etxn[i] != etxn[j] and conflicts(events[j], events[i]):
                    edges.add((refs[etxn[j]], refs[etxn[i]]))
        # fork/join order is part of the trace order even without a
        # data conflict
        first_of = {}
        last_of = {}
        for i, e in enumerate(events):
            first_of.setdefault(e.tid, i)
            last_of[e.tid] = i
        for i, e in enumerate(events):
            if e.op == FORK and e.target in first_of and first_of[e.target] > i:
                c = first_of[e.target]
                if etxn[i] != etxn[c]:
                    edges.add((refs[etxn[i]], refs[etxn[c]]))
            elif e.op == JOIN and e.target in last_of and last_of[e.target] < i:
                c = last_of[e.target]
                if etxn[i] != etxn[c]:
                    edges.add((refs[etxn[c]], refs[etxn[i]]))
        seen = sorted({g for g in etxn[:len(events)]})
        nodes = [refs[g] for g in seen]
        return cls(nodes, edges)

    def topo_order(self):
        """A topological order of the nodes, or None if cyclic."""
        indeg = {v: 0 for v in self.nodes}
        out = {v: [] for v in self.nodes}
        for a, b in self.edges:
            indeg[b] += 1
            out[a].append(b)
        ready = [v for v in self.nodes if indeg[v] == 0]
        order = []
        while ready:
            v = ready.pop()
            order.append(v)
            for w in out[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        return order if len(order) == len(self.nodes) else None

    def has_cycle(self) -> bool:
        return self.topo_order() is None


def first_cs_violation_rebuild(trace: Trace) -> Optional[int]:
    """Same answer as first_cs_violation, by whole-prefix rebuilds."""
    for p in range(1, trace.n + 1):
        if ThbGraph.from_trace(trace, upto=p).has_cycle():
            return p
    return None


def _chb_closure_matrix(trace: Trace, limit: int):
    """reach[i] = bitmask of indices j <= i with event j ordered at-or-before i.

    Built from all conflicting pairs directly, no generating-set
    shortcut, so it is an independent route to the same relation.
    """
    events = trace.events[:limit]
    first_of = {}
    last_of = {}
    for i, e in enumerate(events):
        first_of.setdefault(e.tid, i)
        last_of[e.tid] = i
    reach = []
    for i in range(limit):
        m = 1 << i
        ei = events[i]
        for j in range(i):
            ej = events[j]
            linked = conflicts(ej, ei)
            if not linked and ej.op == FORK and ej.target == ei.tid and first_of.get(ei.tid) == i:
                linked = True
            if not linked and ei.op == JOIN and ei.target == ej.tid and last_of.get(ej.tid) == j:
                linked = True
            if linked:
                m |= reach[j]
        reach.append(m)
    return reach


def first_inc_violation_rebuild(trace: Trace):
    """Same answer as first_inc_violation, by whole-prefix rebuilds.

    For every prefix, evaluates the definition literally over all
    (transaction, inner event, outside event) triples.
    """
    etxn, refs = _txn_of_events(trace)
    begins = {}
    for i, e in enumerate(trace.events):
        if e.op == BEGIN:
            begins[etxn[i]] = i
    for p in range(1, trace.n + 1):
        reach = _chb_closure_matrix(trace, p)
        for i in range(p):
            g = etxn[i]
            b = begins[g]
            for f in range(p):
                if etxn[f] == g:
                    continue
                if (reach[f] >> b) & 1 and (reach[i] >> f) & 1:
                    return p, refs[g]
    return None
