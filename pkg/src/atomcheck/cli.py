"""Command line front end.

Exit status: 0 when the trace is clean, 1 when a violation is found,
2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from .engine import run_cs
from .gen import (
    FIXTURE_NAMES,
    RandomCfg,
    paper_fixture,
    random_omv_instance,
    random_space_instance,
    random_trace,
    velodrome_family,
    well_synced_trace,
)
from .incengine import run_inc
from .model import NormalizeError, TransactionRef
from .monitor import FREE, SEQUENCED, stress_replay
from .oracle import first_cs_violation, first_inc_violation
from .traceio import ParseError, load_trace, serialize_trace


def _node_dict(ref, trace):
    # transaction refs carry a txid; event-level refs are (tid, seq)
    if isinstance(ref, TransactionRef):
        return {"thread": trace.thread_names[ref.tid], "txn": ref.txid}
    tid, seq = ref
    return {"thread": trace.thread_names[tid], "event_seq": seq}


def _node_str(ref, trace):
    if isinstance(ref, TransactionRef):
        return f"{trace.thread_names[ref.tid]}#{ref.txid}"
    tid, seq = ref
    return f"{trace.thread_names[tid]}@{seq}"


def _violation_dict(v, trace):
    if v is None:
        return None
    d = {
        "kind": v.kind,
        "pos": v.pos,
        "detecting_thread": trace.thread_names[v.detecting_tid],
        "source": _node_dict(v.source, trace),
        "target": _node_dict(v.target, trace),
    }
    if v.blamed is not None:
        d["blamed"] = {"thread": trace.thread_names[v.blamed.tid], "txn": v.blamed.txid}
    return d


def _describe(v, trace):
    if v is None:
        return "clean"
    src = _node_str(v.source, trace)
    tgt = _node_str(v.target, trace)
    msg = f"{v.kind} at event {v.pos}: {src} and {tgt} are mutually ordered"
    if v.blamed is not None:
        msg += f"; blamed transaction {trace.thread_names[v.blamed.tid]}#{v.blamed.txid}"
    return msg


def _load(path):
    try:
        if path == "-":
            from .traceio import parse_trace

            return parse_trace(sys.stdin.read())
        return load_trace(path)
    except FileNotFoundError:
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(2)
    except (ParseError, NormalizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _cmd_check(args) -> int:
    trace = _load(args.trace)
    modes = ["cs", "inc"] if args.mode == "both" else [args.mode]
    results = []
    for mode in modes:
        if mode == "cs":
            if args.monitor == "offline":
                run = run_cs(trace)
                results.append(("cs", run.violation, {"ca_calls": run.ca_calls}))
            else:
                rep = stress_replay(
                    trace,
                    mode=SEQUENCED if args.monitor == "sequenced" else FREE,
                    timeout=args.timeout,
                    discipline=False,
                )
                extra = {
                    "realized_events": rep.realized.n,
                    "slow_paths": rep.slow_paths,
                }
                results.append(("cs", rep.violation, extra))
        else:
            if args.monitor != "offline":
                print("error: concurrent monitoring covers cs mode only", file=sys.stderr)
                return 2
            run = run_inc(trace)
            results.append(("inc", run.violation, {"ca_calls": run.ca_calls}))

    found = any(v is not None for _, v, _ in results)
    if args.json:
        out = {
            "file": args.trace,
            "n": trace.n,
            "threads": trace.k,
            "checks": [
                {"mode": m, "violation": _violation_dict(v, trace), **extra}
                for m, v, extra in results
            ],
        }
        print(json.dumps(out, indent=2))
    else:
        for m, v, _extra in results:
            print(f"{args.trace}: [{m}] {_describe(v, trace)}")
    return 1 if found else 0


def _cmd_oracle(args) -> int:
    trace = _load(args.trace)
    modes = ["cs", "inc"] if args.mode == "both" else [args.mode]
    results = []
    for mode in modes:
        if mode == "cs":
            pos = first_cs_violation(trace)
            results.append(("cs", pos))
        else:
            hit = first_inc_violation(trace)
            results.append(("inc", hit[0] if hit else None))
    found = any(p is not None for _, p in results)
    if args.json:
        print(
            json.dumps(
                {
                    "file": args.trace,
                    "checks": [{"mode": m, "first_violation_pos": p} for m, p in results],
                },
                indent=2,
            )
        )
    else:
        for m, p in results:
            verdict = "clean" if p is None else f"violation at event {p}"
            print(f"{args.trace}: [{m}] oracle: {verdict}")
    return 1 if found else 0


def _emit_trace(trace, out):
    text = serialize_trace(trace)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_gen(args) -> int:
    if args.family == "random":
        cfg = RandomCfg(
            n=args.n,
            k=args.threads,
            num_vars=args.vars,
            num_locks=args.locks,
            seed=args.seed,
        )
        trace = random_trace(cfg)
    elif args.family == "velodrome":
        trace = velodrome_family(args.j)
    elif args.family == "omv":
        inst = random_omv_instance(args.m, args.pairs, seed=args.seed)
        trace = inst.trace
    elif args.family == "space":
        members, probe, trace = random_space_instance(args.universe, seed=args.seed)
        print(f"# members={sorted(members)} probe={probe}", file=sys.stderr)
    else:
        if args.name not in FIXTURE_NAMES:
            print(
                f"error: unknown fixture {args.name!r}; choose from {', '.join(FIXTURE_NAMES)}",
                file=sys.stderr,
            )
            return 2
        trace = paper_fixture(args.name)
    _emit_trace(trace, args.out)
    return 0


def _cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    rows = []
    for size in sizes:
        if args.family == "random":
            cfg = RandomCfg(n=size, k=args.threads, num_vars=6, num_locks=3, seed=args.seed)
            trace = random_trace(cfg)
        elif args.family == "synced":
            trace = well_synced_trace(size, k=args.threads, seed=args.seed)
        else:
            trace = velodrome_family(size)
        best = None
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            run = run_cs(trace) if args.mode == "cs" else run_inc(trace)
            dt = time.perf_counter() - t0
            best = dt if best is None else min(best, dt)
        rows.append((args.family, args.mode, size, trace.n, best, run.ca_calls))
    if args.csv:
        print("family,mode,size,events,seconds,ca_calls")
        for fam, m, size, n, secs, ca in rows:
            print(f"{fam},{m},{size},{n},{secs:.6f},{ca}")
    else:
        for fam, m, size, n, secs, ca in rows:
            rate = n / secs if secs > 0 else float("inf")
            print(
                f"{fam} {m} size={size} events={n} "
                f"time={secs * 1000:.2f} ms rate={rate / 1000:.0f}k ev/s ca_calls={ca}"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="atomcheck",
        description="Streaming atomicity-violation checkers for concurrent traces.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run the streaming checkers on a trace file")
    c.add_argument("trace", help="trace file, or - for stdin")
    c.add_argument("--mode", choices=["cs", "inc", "both"], default="cs")
    c.add_argument(
        "--monitor",
        choices=["offline", "sequenced", "free"],
        default="offline",
        help="offline single-thread pass, or concurrent replay",
    )
    c.add_argument("--timeout", type=float, default=30.0, help="concurrent replay budget")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=_cmd_check)

    o = sub.add_parser("oracle", help="run the brute-force reference check")
    o.add_argument("trace", help="trace file, or - for stdin")
    o.add_argument("--mode", choices=["cs", "inc", "both"], default="cs")
    o.add_argument("--json", action="store_true")
    o.set_defaults(func=_cmd_oracle)

    g = sub.add_parser("gen", help="generate a trace")
    gsub = g.add_subparsers(dest="family", required=True)
    gr = gsub.add_parser("random", help="seeded random trace")
    gr.add_argument("--n", type=int, default=200)
    gr.add_argument("--threads", type=int, default=4)
    gr.add_argument("--vars", type=int, default=4)
    gr.add_argument("--locks", type=int, default=2)
    gr.add_argument("--seed", type=int, default=0)
    gv = gsub.add_parser("velodrome", help="two-thread family linear for the checker")
    gv.add_argument("--j", type=int, default=100)
    gm = gsub.add_parser("omv", help="matrix-vector query family")
    gm.add_argument("--m", type=int, default=4)
    gm.add_argument("--pairs", type=int, default=4)
    gm.add_argument("--seed", type=int, default=0)
    gs = gsub.add_parser("space", help="set-membership family")
    gs.add_argument("--universe", type=int, default=16)
    gs.add_argument("--seed", type=int, default=0)
    gf = gsub.add_parser("fixture", help="one of the bundled walkthrough traces")
    gf.add_argument("--name", required=True, help=", ".join(FIXTURE_NAMES))
    for sp in (gr, gv, gm, gs, gf):
        sp.add_argument("--out", default=None, help="output file (default stdout)")
    g.set_defaults(func=_cmd_gen)

    b = sub.add_parser("bench", help="time the checker on generated traces")
    b.add_argument(
        "--family",
        choices=["synced", "random", "velodrome"],
        default="synced",
        help="synced streams are serializable, so the timing covers all"
        " events; random traces usually violate within a few dozen",
    )
    b.add_argument("--mode", choices=["cs", "inc"], default="cs")
    b.add_argument("--sizes", default="100000,200000", help="comma-separated sizes")
    b.add_argument("--threads", type=int, default=8)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--csv", action="store_true")
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NormalizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
