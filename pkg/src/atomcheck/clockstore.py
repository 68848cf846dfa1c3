"""Constant-space reachability summaries between per-thread id sequences.

The store keeps, for every ordered pair of distinct threads (t1, t2),
one remembered edge from t2's id sequence into t1's: from_id[t1][t2]
is the largest source id of t2 known to reach t1, and to_id[t1][t2]
is the smallest id of t1 known to be reached from that source. 0 is
the absent value; real ids start at 1. Ids are per-thread transaction
indices for the transaction-level checker and per-thread event
sequence numbers for the event-level one.

Exactly 2*k*k integers, regardless of trace length. Rows (all entries
indexed [t][*]) are the unit of ownership for the concurrent monitor:
row t is written only while t's token is held exclusively.
"""

from __future__ import annotations

BOTTOM = 0


class ClockStore:
    __slots__ = ("k", "from_id", "to_id")

    def __init__(self, k: int):
        if k < 0:
            raise ValueError("thread count cannot be negative")
        self.k = k
        self.from_id = [[0] * k for _ in range(k)]
        self.to_id = [[0] * k for _ in range(k)]

    def successor(self, t1: int, j1: int, t2: int) -> int:
        """Smallest known id of t2 reachable from (t1, j1), or 0."""
        f = self.from_id[t2][t1]
        if f and f >= j1:
            return self.to_id[t2][t1]
        return 0

    def predecessor(self, t1: int, j1: int, t2: int) -> int:
        """Largest known id of t2 that reaches (t1, j1), or 0."""
        t = self.to_id[t1][t2]
        if t and t <= j1:
            return self.from_id[t1][t2]
        return 0

    def reachable(self, t1: int, j1: int, t2: int, j2: int) -> bool:
        """Is (t1, j1) known to happen before (t2, j2)?

        Same thread falls back to id order. Sound and, for the
        maintained invariants, complete for open targets.
        """
        if t1 == t2:
            return j1 <= j2
        f = self.from_id[t2][t1]
        if f and f >= j1:
            return self.to_id[t2][t1] <= j2
        return False

    def add_successor(self, t1: int, j1: int, t2: int, j2: int) -> None:
        """Record that (t1, j1) happens before (t2, j2).

        Strengthens the remembered edge for the (t2, t1) cell: a larger
        source always wins; an equal source keeps the smaller target.
        Either endpoint absent (id 0) is a no-op. Same-thread edges are
        the caller's responsibility to elide.
        """
        if t1 == t2:
            raise ValueError("same-thread edges are implicit in id order")
        if not j1 or not j2:
            return
        row_from = self.from_id[t2]
        f = row_from[t1]
        if f < j1:
            row_from[t1] = j1
            self.to_id[t2][t1] = j2
        elif f == j1 and self.to_id[t2][t1] > j2:
            self.to_id[t2][t1] = j2

    def entry_count(self) -> int:
        return 2 * self.k * self.k

    def snapshot(self) -> tuple:
        """Immutable copy of both matrices, for tests and audits."""
        return (
            tuple(tuple(row) for row in self.from_id),
            tuple(tuple(row) for row in self.to_id),
        )


class RecordingStore(ClockStore):
    """ClockStore that logs every operation. Test instrumentation.

    The log holds ("successor"|"predecessor"|"reachable"|"add", args)
    tuples in call order.
    """

    __slots__ = ("log",)

    def __init__(self, k: int):
        super().__init__(k)
        self.log = []

    def successor(self, t1, j1, t2):
        self.log.append(("successor", (t1, j1, t2)))
        return super().successor(t1, j1, t2)

    def predecessor(self, t1, j1, t2):
        self.log.append(("predecessor", (t1, j1, t2)))
        return super().predecessor(t1, j1, t2)

    def reachable(self, t1, j1, t2, j2):
        self.log.append(("reachable", (t1, j1, t2, j2)))
        return super().reachable(t1, j1, t2, j2)

    def add_successor(self, t1, j1, t2, j2):
        self.log.append(("add", (t1, j1, t2, j2)))
        return super().add_successor(t1, j1, t2, j2)
