"""
Command-line entry point.

::

    agreetree mast <rooted|unrooted|mixed> A.nwk B.nwk [--witness] [--json]
    agreetree cavity G.edges [--json]
    agreetree verify --suite <name|all> --seed S --cases K --max-n M
    agreetree bench --suite <cavity|unrooted> --sizes n1,n2 --seed S

Exit codes: 0 success, 1 verification failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import matching, oracle, rooted, unrooted
from .tree import NewickError, parse_newick, serialize_newick
from .verification import case_rng, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

SUITE_NAMES = ["cavity", "rooted", "unrooted", "compression", "rangequery", "mixed"]


@dataclass
class RunReport:
    """Machine-readable summary of one invocation."""

    command: str
    inputs: dict
    answer: object
    elapsed: float
    counters: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


class InputError(Exception):
    """Unreadable or malformed input; maps to exit code 2."""


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _tree(path: str, rooted_tree: bool):
    try:
        return parse_newick(_read(path), rooted=rooted_tree)
    except NewickError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_mast(args) -> RunReport:
    if args.witness and args.mode != "rooted":
        raise InputError("--witness is only available in rooted mode")
    is_rooted = args.mode == "rooted"
    t1 = _tree(args.a, is_rooted)
    t2 = _tree(args.b, is_rooted)
    inputs = {"mode": args.mode, "a": args.a, "b": args.b}
    t0 = time.perf_counter()
    if is_rooted:
        st = rooted.MastStats()
        if args.witness:
            value, wit = rooted.rooted_witness(t1, t2, st)
            answer = {"size": int(value), "witness": serialize_newick(wit)}
        else:
            answer = int(rooted.mast_rooted(t1, t2, st))
        counters = {"matchings": st.matchings, "node_pairs": st.node_pairs,
                    "subproblems": 0, "max_depth": 0}
    else:
        if args.mode == "unrooted" and (t1.arcs or t2.arcs):
            raise InputError("directed edges need mixed mode")
        st = unrooted.RecursionStats()
        fn = unrooted.mast_unrooted if args.mode == "unrooted" else unrooted.mast_mixed
        answer = int(fn(t1, t2, mode=args.aux, stats=st))
        counters = st.as_dict()
    return RunReport("mast", inputs, answer, time.perf_counter() - t0, counters)


def cmd_cavity(args) -> RunReport:
    try:
        g = matching.read_edge_list(_read(args.graph))
    except ValueError as exc:
        raise InputError(f"{args.graph}: {exc}") from None
    t0 = time.perf_counter()
    res = matching.all_cavity(g)
    answer = {"mwm": int(res.mwm), "x": res.values_x.tolist(), "y": res.values_y.tolist()}
    counters = {"matchings": 1, "nodes": g.nx + g.ny, "edges": g.m}
    return RunReport("cavity", {"graph": args.graph}, answer, time.perf_counter() - t0, counters)


def cmd_verify(args) -> RunReport:
    names = SUITE_NAMES if args.suite == "all" else [args.suite]
    t0 = time.perf_counter()
    results = []
    for name in names:
        kw = {"mode": args.aux} if name in ("unrooted", "mixed") and args.aux else {}
        res = run_suite(name, args.seed, args.cases, args.max_n, workers=args.workers, **kw)
        results.append(res)
        if not res.ok:
            break
    failed = [r for r in results if not r.ok]
    answer = {
        "ok": not failed,
        "suites": {r.suite: {"cases": r.cases, "failures": r.failures} for r in results},
        "counterexample": dict(failed[0].counterexample, suite=failed[0].suite) if failed else None,
    }
    counters: dict = {}
    for r in results:
        for k, v in r.counters.items():
            counters[k] = counters.get(k, 0) + v
    inputs = {"suite": args.suite, "seed": args.seed, "cases": args.cases, "max_n": args.max_n}
    return RunReport("verify", inputs, answer, time.perf_counter() - t0, counters)


BENCH_COLUMNS = {
    "cavity": ["suite", "size", "edges", "repeats", "median_seconds", "mwm"],
    "unrooted": ["suite", "size", "repeats", "median_seconds", "mast", "spawns",
                 "subproblems", "max_depth", "node_pairs", "node_pair_ratio"],
}


def _bench_cavity(rng, n, repeats):
    m = 5 * n
    m = min(m, n * n)
    cells = rng.choice(n * n, size=m, replace=False) if m else np.zeros(0, dtype=np.int64)
    xs, ys = np.divmod(cells, n)
    ws = rng.integers(1, 1001, size=m)
    g = matching.WeightedBipartiteGraph(n, n, list(zip(xs.tolist(), ys.tolist(), ws.tolist())))
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = matching.all_cavity(g)
        times.append(time.perf_counter() - t0)
    return {"edges": g.m, "median_seconds": statistics.median(times), "mwm": int(res.mwm)}


def _bench_unrooted(rng, n, repeats):
    labels = list(range(n))
    u1 = oracle.random_unrooted_tree(rng, labels)
    u2 = oracle.random_unrooted_tree(rng, labels)
    times = []
    for _ in range(repeats):
        st = unrooted.RecursionStats()
        t0 = time.perf_counter()
        value = unrooted.mast_unrooted(u1, u2, mode="fast", stats=st)
        times.append(time.perf_counter() - t0)
    naive = len(u1.internal_nodes()) * len(u2.internal_nodes()) * u1.n * u2.n
    return {"median_seconds": statistics.median(times), "mast": int(value),
            "spawns": st.spawns, "subproblems": st.subproblems, "max_depth": st.max_depth,
            "node_pairs": st.dp.node_pairs, "node_pair_ratio": st.dp.node_pairs / max(1, naive)}


def cmd_bench(args) -> RunReport:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()] if args.sizes else []
    rows = []
    t0 = time.perf_counter()
    for n in sizes:
        rng = case_rng(args.seed, n)
        fn = _bench_cavity if args.suite == "cavity" else _bench_unrooted
        row = {"suite": args.suite, "size": n, "repeats": args.repeats}
        row.update(fn(rng, n, args.repeats))
        rows.append(row)
    inputs = {"suite": args.suite, "sizes": sizes, "seed": args.seed}
    return RunReport("bench", inputs, rows, time.perf_counter() - t0, {"runs": len(rows)})


# ---------------------------------------------------------------------------
# Argument parsing and output
# ---------------------------------------------------------------------------

def _sizes(text: str) -> str:
    for part in text.split(","):
        if part.strip() and not part.strip().isdigit():
            raise argparse.ArgumentTypeError(f"bad size {part!r}")
    return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agreetree", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mast", help="agreement subtree size of two Newick files")
    m.add_argument("mode", choices=["rooted", "unrooted", "mixed"])
    m.add_argument("a")
    m.add_argument("b")
    m.add_argument("--witness", action="store_true", help="also print one agreement subtree")
    m.add_argument("--json", action="store_true")
    m.add_argument("--aux", choices=list(unrooted.MODES), default=None,
                   help="annotation path for unrooted/mixed runs")

    c = sub.add_parser("cavity", help="all-cavity matching values of an edge list")
    c.add_argument("graph")
    c.add_argument("--json", action="store_true")

    v = sub.add_parser("verify", help="seeded comparison against the oracles")
    v.add_argument("--suite", choices=SUITE_NAMES + ["all"], default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int, default=100)
    v.add_argument("--max-n", type=int, default=25)
    v.add_argument("--workers", type=int, default=None)
    v.add_argument("--aux", choices=list(unrooted.MODES), default=None)
    v.add_argument("--json", action="store_true")

    b = sub.add_parser("bench", help="timing table as CSV")
    b.add_argument("--suite", choices=sorted(BENCH_COLUMNS), required=True)
    b.add_argument("--sizes", type=_sizes, default="")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--json", action="store_true")
    return p


def _emit(args, report: RunReport, out) -> int:
    if args.json:
        out.write(report.to_json() + "\n")
    elif report.command == "mast":
        ans = report.answer
        if isinstance(ans, dict):
            out.write(f"{ans['size']}\n{ans['witness']}\n")
        else:
            out.write(f"{ans}\n")
    elif report.command == "cavity":
        ans = report.answer
        out.write(f"mwm {ans['mwm']}\n")
        res = matching.CavityResult(ans["mwm"], np.asarray(ans["x"]), np.asarray(ans["y"]), None)
        out.write(matching.format_cavity(res))
    elif report.command == "verify":
        for name, r in report.answer["suites"].items():
            status = "ok" if r["failures"] == 0 else "FAIL"
            out.write(f"{name}: {status} ({r['cases']} cases)\n")
        if report.answer["counterexample"] is not None:
            out.write("counterexample: " + json.dumps(report.answer["counterexample"],
                                                      sort_keys=True) + "\n")
    elif report.command == "bench":
        cols = BENCH_COLUMNS[report.inputs["suite"]]
        w = csv.DictWriter(out, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in report.answer:
            w.writerow({k: row.get(k) for k in cols})
    if report.command == "verify" and not report.answer["ok"]:
        return EXIT_FAIL
    return EXIT_OK


COMMANDS = {"mast": cmd_mast, "cavity": cmd_cavity, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"agreetree: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"agreetree: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return _emit(args, report, out)


if __name__ == "__main__":
    sys.exit(main())
