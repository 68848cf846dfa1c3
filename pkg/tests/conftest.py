import random

import pytest

from atomcheck import RandomCfg, random_trace
from atomcheck.model import (
    ACQUIRE,
    BEGIN,
    END,
    FORK,
    JOIN,
    READ,
    RELEASE,
    WRITE,
    TraceBuilder,
)

_MNEMONIC = {
    "b": BEGIN,
    "e": END,
    "r": READ,
    "w": WRITE,
    "acq": ACQUIRE,
    "rel": RELEASE,
    "fork": FORK,
    "join": JOIN,
}


def build_trace(steps):
    """Assemble a trace from mnemonic steps: [('T0', 'b'), ('T0', 'w', 'x'), ...]."""
    b = TraceBuilder()
    for step in steps:
        thread, op = step[0], _MNEMONIC[step[1]]
        operand = step[2] if len(step) > 2 else None
        b.add(thread, op, operand)
    return b.build()


@pytest.fixture
def build():
    return build_trace


def fuzz_traces(count, n=150, k=4, num_vars=4, num_locks=2, seed_base=0):
    """Deterministic stream of seeded random traces for property tests."""
    for i in range(count):
        cfg = RandomCfg(
            n=n, k=k, num_vars=num_vars, num_locks=num_locks, seed=seed_base + i
        )
        yield random_trace(cfg)


def vary_cfgs(count, seed_base, n_max=300, k_max=6, v_max=6, l_max=3):
    """Config sweep used by the fuzz comparisons: sizes vary per seed."""
    rng = random.Random(seed_base)
    for i in range(count):
        yield RandomCfg(
            n=rng.randrange(20, n_max + 1),
            k=rng.randrange(2, k_max + 1),
            num_vars=rng.randrange(1, v_max + 1),
            num_locks=rng.randrange(0, l_max + 1),
            seed=seed_base + i,
        )
