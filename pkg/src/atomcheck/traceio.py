"""Text format for traces.

One event per line:

    <thread>|<op>|<operand>

thread is T<decimal>. op is one of b, e, r, w, acq, rel, fork, join.
The operand is a variable name for r/w, a lock name for acq/rel, a
thread for fork/join, and empty for b/e. Full-line comments start
with '#'. Blank lines are ignored.

parse_trace interns names in first-appearance order and returns the
normalized trace, so parse(serialize(t)) == t for any normalized t.
"""

from __future__ import annotations

import re

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
)

_OP_CODES = {
    "b": BEGIN,
    "e": END,
    "r": READ,
    "w": WRITE,
    "acq": ACQUIRE,
    "rel": RELEASE,
    "fork": FORK,
    "join": JOIN,
}
_CODE_OF = {v: k for k, v in _OP_CODES.items()}

_TID_RE = re.compile(r"^T\d+$")
_NAME_RE = re.compile(r"^[^|\s]+$")


class ParseError(ValueError):
    def __init__(self, line_no: int, msg: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {msg}")


def parse_trace(text: str) -> Trace:
    """Parse trace text, normalize, and return the Trace.

    Raises ParseError on malformed lines and NormalizeError on traces
    with unrepairable structural defects.
    """
    b = TraceBuilder()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) == 2:
            parts.append("")
        if len(parts) != 3:
            raise ParseError(line_no, f"expected 'thread|op|operand', got {raw!r}")
        tid_s, op_s, operand = (p.strip() for p in parts)
        if not _TID_RE.match(tid_s):
            raise ParseError(line_no, f"bad thread id {tid_s!r}, expected T<decimal>")
        op = _OP_CODES.get(op_s)
        if op is None:
            raise ParseError(line_no, f"unknown op {op_s!r}")
        if op in (BEGIN, END):
            if operand:
                raise ParseError(line_no, f"op {op_s!r} takes no operand, got {operand!r}")
            b.add(tid_s, op)
        elif op in (FORK, JOIN):
            if not _TID_RE.match(operand):
                raise ParseError(line_no, f"{op_s} operand must be T<decimal>, got {operand!r}")
            b.add(tid_s, op, operand)
        else:
            if not _NAME_RE.match(operand):
                raise ParseError(line_no, f"bad operand {operand!r} for op {op_s!r}")
            b.add(tid_s, op, operand)
    return b.build()


def serialize_trace(trace: Trace) -> str:
    """Canonical text for a trace. Inverse of parse_trace on normalized traces."""
    lines = []
    for e in trace.events:
        code = _CODE_OF[e.op]
        if e.op in (READ, WRITE):
            operand = trace.var_names[e.target]
        elif e.op in (ACQUIRE, RELEASE):
            operand = trace.lock_names[e.target]
        elif e.op in (FORK, JOIN):
            operand = trace.thread_names[e.target]
        else:
            operand = ""
        lines.append(f"T{e.tid}|{code}|{operand}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_trace(path) -> Trace:
    with open(path, "r", encoding="utf-8") as f:
        return parse_trace(f.read())


def dump_trace(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_trace(trace))
