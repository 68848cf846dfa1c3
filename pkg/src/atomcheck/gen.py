"""Trace generators: seeded random traces, packaged fixtures, and
adversarial families with known verdicts.

Everything here is deterministic given its arguments. Random traces
are structurally valid by construction: body events sit inside
transactions, locks are acquired only when free and released before
the owning transaction ends, so normalization never has to add
events and the requested event count is exact.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .model import (
    ACQUIRE,
    BEGIN,
    END,
    READ,
    RELEASE,
    WRITE,
    Trace,
    TraceBuilder,
)
from .traceio import parse_trace

FIXTURE_NAMES = (
    "sigma1",
    "sigma3",
    "sigma4",
    "sigma5",
    "sigma6",
    "sigma7",
    "sigma9",
    "aerodrome_cex",
)


def paper_fixture(name: str) -> Trace:
    """Load one of the packaged example traces by name."""
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture {name!r}, have {', '.join(FIXTURE_NAMES)}")
    text = resources.files("atomcheck").joinpath(f"fixtures/{name}.txt").read_text("utf-8")
    return parse_trace(text)


@dataclass(frozen=True)
class RandomCfg:
    """Knobs for random_trace.

    n             exact event count of the produced trace
    k             thread pool size (threads that never get scheduled
                  are absent from the result)
    num_vars      shared variable pool
    num_locks     lock pool; 0 disables lock events
    txn_len_mean  mean body events per transaction
    write_prob    probability a variable access is a write
    lock_prob     probability a body slot becomes an acquire
    seed          64-bit seed; same cfg means same trace
    """

    n: int = 100
    k: int = 4
    num_vars: int = 4
    num_locks: int = 2
    txn_len_mean: float = 4.0
    write_prob: float = 0.5
    lock_prob: float = 0.1
    seed: int = 0


def random_trace(cfg: RandomCfg) -> Trace:
    rng = random.Random(cfg.seed)
    b = TraceBuilder()
    in_txn = [False] * cfg.k
    left = [0] * cfg.k          # body events still to emit in the open txn
    holding = [None] * cfg.k    # lock id held, at most one per thread
    held = set()                # locks held by anyone

    def txn_len() -> int:
        return max(1, int(rng.expovariate(1.0 / cfg.txn_len_mean)) + 1)

    emitted = 0
    while emitted < cfg.n:
        remaining = cfg.n - emitted
        holders = [u for u in range(cfg.k) if holding[u] is not None]
        if holders and remaining <= len(holders):
            # spend the last slots draining critical sections so no
            # acquire is left unmatched by the global budget
            t = holders[rng.randrange(len(holders))]
            held.discard(holding[t])
            b.add(f"T{t}", RELEASE, f"l{holding[t]}")
            holding[t] = None
            left[t] -= 1
            emitted += 1
            continue
        t = rng.randrange(cfg.k)
        name = f"T{t}"
        if not in_txn[t]:
            b.add(name, BEGIN)
            in_txn[t] = True
            left[t] = txn_len()
        elif holding[t] is not None and (left[t] <= 1 or rng.random() < 0.3):
            held.discard(holding[t])
            b.add(name, RELEASE, f"l{holding[t]}")
            holding[t] = None
            left[t] -= 1
        elif left[t] <= 0:
            b.add(name, END)
            in_txn[t] = False
        else:
            free = None
            if (
                cfg.num_locks
                and holding[t] is None
                and left[t] >= 2
                and remaining > len(holders) + 2
                and rng.random() < cfg.lock_prob
            ):
                choices = [l for l in range(cfg.num_locks) if l not in held]
                if choices:
                    free = rng.choice(choices)
            if free is not None:
                b.add(name, ACQUIRE, f"l{free}")
                holding[t] = free
                held.add(free)
                left[t] -= 1
            else:
                op = WRITE if rng.random() < cfg.write_prob else READ
                b.add(name, op, f"x{rng.randrange(cfg.num_vars)}")
                left[t] -= 1
        emitted += 1
    return b.build()


def well_synced_trace(n: int, k: int = 8, num_locks: int = 4, seed: int = 0) -> Trace:
    """Conflict-heavy trace that is serializable for every interleaving.

    Each transaction runs exactly one critical section and touches only
    variables owned by that section's lock, plus thread-private filler.
    Transactions sharing a lock form a chain through the lock and its
    variables; transactions on different locks never conflict, so the
    transaction graph is a union of chains and never has a cycle. Good
    for timing the checker on long streams it will not bail out of.
    """
    rng = random.Random(seed)
    b = TraceBuilder()
    in_txn = [False] * k
    stage = [0] * k             # steps left in the open transaction
    lock_of = [0] * k
    held = set()
    emitted = 0
    while emitted < n:
        holders = [u for u in range(k) if in_txn[u] and 1 <= stage[u]]
        need = sum(stage[u] for u in holders)
        if holders and n - emitted <= need:
            t = holders[rng.randrange(len(holders))]
            if stage[t] > 1:
                b.add(f"T{t}", WRITE, f"s{lock_of[t]}_0")
                stage[t] -= 1
            else:
                held.discard(lock_of[t])
                b.add(f"T{t}", RELEASE, f"l{lock_of[t]}")
                stage[t] = -1
            emitted += 1
            continue
        t = rng.randrange(k)
        name = f"T{t}"
        if not in_txn[t]:
            b.add(name, BEGIN)
            in_txn[t] = True
            stage[t] = 0
        elif stage[t] == 0:
            choices = [l for l in range(num_locks) if l not in held]
            if not choices or n - emitted <= need + 6:
                b.add(name, READ, f"p{t}")
            else:
                lock = rng.choice(choices)
                lock_of[t] = lock
                held.add(lock)
                b.add(name, ACQUIRE, f"l{lock}")
                stage[t] = rng.randrange(2, 5)
        elif stage[t] > 1:
            lock = lock_of[t]
            op = WRITE if rng.random() < 0.6 else READ
            b.add(name, op, f"s{lock}_{rng.randrange(2)}")
            stage[t] -= 1
        elif stage[t] == 1:
            held.discard(lock_of[t])
            b.add(name, RELEASE, f"l{lock_of[t]}")
            stage[t] = -1
        else:
            b.add(name, END)
            in_txn[t] = False
        emitted += 1
    return b.build()


# ---------------------------------------------------------------------------
# adversarial families
# ---------------------------------------------------------------------------

def velodrome_family(j: int) -> Trace:
    """One long transaction interleaved with j short ones.

    Thread 0 opens a single transaction and writes x_1 .. x_j; after
    each write, thread 1 runs a whole transaction writing the same
    variable. Serializable for every j. Total events: 4j + 2.

    The streaming checker does constant work per event here; any
    oracle that recomputes closures grows superlinearly, which is
    what the scaling tests lean on.
    """
    if j < 1:
        raise ValueError("j must be positive")
    b = TraceBuilder()
    b.add("T0", BEGIN)
    for i in range(j):
        b.add("T0", WRITE, f"x{i}")
        b.add("T1", BEGIN)
        b.add("T1", WRITE, f"x{i}")
        b.add("T1", END)
    b.add("T0", END)
    return b.build()


@dataclass
class OmvInstance:
    """A matrix-vector query workload encoded as a trace.

    m row threads hold transactions that start by writing x_a; m
    column threads hold transactions that read x_a exactly where
    matrix[a][b] is 1. Each query pair (u, v) then runs two fresh
    transactions: the u side writes y_i and the flagged row threads
    read it; the flagged column threads read z_i before the v side
    writes it; finally the v side writes s_i and the u side reads it
    back. That last read closes a cycle exactly when some path
    u -> row -> column -> v exists, i.e. when u^T M v = 1.

    segments[i] is the (first, last) position span of query i in the
    full trace. pair_trace(i) rebuilds the prologue plus query i
    alone, which is the clean per-query observable: in the full trace
    an earlier query's edges can contaminate later answers.
    """

    matrix: list
    pairs: list
    trace: Trace
    segments: list

    def pair_trace(self, i: int) -> Trace:
        return _omv_build(self.matrix, [self.pairs[i]], start_index=i).trace


def _omv_build(matrix, pairs, start_index: int = 0) -> "OmvInstance":
    m = len(matrix)
    for row in matrix:
        if len(row) != m:
            raise ValueError("matrix must be square")
    b = TraceBuilder()
    for a in range(m):
        b.add(f"R{a}", BEGIN)
        b.add(f"R{a}", WRITE, f"x{a}")
    for col in range(m):
        b.add(f"C{col}", BEGIN)
        for a in range(m):
            if matrix[a][col]:
                b.add(f"C{col}", READ, f"x{a}")
    segments = []
    pos = b.raw().n
    for idx, (u, v) in enumerate(pairs, start=start_index):
        if len(u) != m or len(v) != m:
            raise ValueError("vectors must match matrix size")
        start = pos + 1
        b.add(f"U{idx}", BEGIN)
        b.add(f"U{idx}", WRITE, f"y{idx}")
        for a in range(m):
            if u[a]:
                b.add(f"R{a}", READ, f"y{idx}")
        for col in range(m):
            if v[col]:
                b.add(f"C{col}", READ, f"z{idx}")
        b.add(f"V{idx}", BEGIN)
        b.add(f"V{idx}", WRITE, f"z{idx}")
        b.add(f"V{idx}", WRITE, f"s{idx}")
        b.add(f"U{idx}", READ, f"s{idx}")
        b.add(f"U{idx}", END)
        b.add(f"V{idx}", END)
        pos = b.raw().n
        segments.append((start, pos))
    for a in range(m):
        b.add(f"R{a}", END)
    for col in range(m):
        b.add(f"C{col}", END)
    return OmvInstance(matrix=matrix, pairs=pairs, trace=b.build(), segments=segments)


def omv_family(matrix, pairs) -> OmvInstance:
    """Build the query workload for a 0/1 matrix and (u, v) vector pairs."""
    return _omv_build(matrix, list(pairs))


def space_family(members, probe: int, universe: int) -> Trace:
    """Two transactions whose overlap is controlled by set membership.

    Thread 0 opens a transaction and writes x_a for each a in
    members (ascending). Thread 1 then runs a transaction writing
    x_probe and y. Thread 0 finishes by writing y. The trace has a
    violation exactly when probe is in members: then thread 0's
    transaction reaches thread 1's through x_probe and the final
    write of y comes back.

    Any checker must effectively remember the whole write set of the
    open transaction, which is the point of this family.
    """
    members = sorted(set(members))
    if members and not (0 <= members[0] and members[-1] < universe):
        raise ValueError("members must lie in range(universe)")
    if not (0 <= probe < universe):
        raise ValueError("probe must lie in range(universe)")
    b = TraceBuilder()
    b.add("T0", BEGIN)
    for a in members:
        b.add("T0", WRITE, f"x{a}")
    b.add("T1", BEGIN)
    b.add("T1", WRITE, f"x{probe}")
    b.add("T1", WRITE, "y")
    b.add("T1", END)
    b.add("T0", WRITE, "y")
    b.add("T0", END)
    return b.build()


def random_omv_instance(m: int, n_pairs: int, seed: int, density: float = 0.5) -> OmvInstance:
    """Random matrix and query vectors, for differential sweeps."""
    rng = random.Random(seed)
    matrix = [[1 if rng.random() < density else 0 for _ in range(m)] for _ in range(m)]
    pairs = [
        (
            [1 if rng.random() < density else 0 for _ in range(m)],
            [1 if rng.random() < density else 0 for _ in range(m)],
        )
        for _ in range(n_pairs)
    ]
    return omv_family(matrix, pairs)


def random_space_instance(universe: int, seed: int) -> tuple:
    """Random (members, probe, trace); verdict should be probe-in-members."""
    rng = random.Random(seed)
    size = rng.randrange(0, universe + 1)
    members = rng.sample(range(universe), size)
    probe = rng.randrange(universe)
    return members, probe, space_family(members, probe, universe)
