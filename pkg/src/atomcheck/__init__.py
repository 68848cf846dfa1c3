"""Streaming detection of atomicity violations in concurrent traces.

Two checkers share one vector-clock-like store over transaction and
event ids: a conflict-serializability checker that reports the first
event closing a cycle of conflicting transactions, and a stricter
in-transaction ordering checker that reports the first event ordered
after an outside event that follows the transaction's begin. Both run
online in one pass. A brute-force oracle, trace generators, and a
lock-based concurrent monitor round out the toolbox.
"""

from .clockstore import BOTTOM, ClockStore, RecordingStore
from .engine import CS_KIND, INC_KIND, CsChecker, CsRun, Violation, run_cs
from .gen import (
    FIXTURE_NAMES,
    OmvInstance,
    RandomCfg,
    omv_family,
    paper_fixture,
    random_omv_instance,
    random_space_instance,
    random_trace,
    space_family,
    velodrome_family,
    well_synced_trace,
)
from .incengine import IncChecker, IncRun, run_inc
from .model import (
    Event,
    NormalizeError,
    Trace,
    TraceBuilder,
    TransactionRef,
    ValidationReport,
    conflicts,
    normalize,
    validate,
)
from .monitor import (
    FREE,
    SEQUENCED,
    MonitorError,
    ReplayReport,
    RWToken,
    SharedMonitor,
    stress_replay,
)
from .oracle import (
    ChbIndex,
    TxnOrderOracle,
    chb_ordered,
    first_cs_violation,
    first_cs_violation_rebuild,
    first_inc_violation,
    first_inc_violation_rebuild,
    lrt_ert,
)
from .traceio import ParseError, dump_trace, load_trace, parse_trace, serialize_trace

__version__ = "0.1.0"

__all__ = [
    "BOTTOM",
    "ClockStore",
    "RecordingStore",
    "CS_KIND",
    "INC_KIND",
    "CsChecker",
    "CsRun",
    "Violation",
    "run_cs",
    "IncChecker",
    "IncRun",
    "run_inc",
    "Event",
    "Trace",
    "TraceBuilder",
    "TransactionRef",
    "ValidationReport",
    "NormalizeError",
    "conflicts",
    "normalize",
    "validate",
    "ParseError",
    "parse_trace",
    "serialize_trace",
    "load_trace",
    "dump_trace",
    "first_cs_violation",
    "first_cs_violation_rebuild",
    "first_inc_violation",
    "first_inc_violation_rebuild",
    "TxnOrderOracle",
    "ChbIndex",
    "chb_ordered",
    "lrt_ert",
    "FIXTURE_NAMES",
    "paper_fixture",
    "RandomCfg",
    "random_trace",
    "velodrome_family",
    "well_synced_trace",
    "OmvInstance",
    "omv_family",
    "random_omv_instance",
    "space_family",
    "random_space_instance",
    "SharedMonitor",
    "RWToken",
    "MonitorError",
    "ReplayReport",
    "stress_replay",
    "SEQUENCED",
    "FREE",
    "__version__",
]
