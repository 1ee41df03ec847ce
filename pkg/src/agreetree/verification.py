"""
Seeded property suites comparing the fast paths with the oracles.

Every case draws its randomness from its own child of one
:class:`numpy.random.SeedSequence`, so a failing case is reproduced from
``(seed, case index)`` alone.  Module attributes are looked up at call time,
which lets tests swap in deliberately broken implementations.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import compression, matching, oracle, rangequery, rooted, unrooted
from .tree import Tree, preorder_index, serialize_newick, subtree_at

__all__ = ["SuiteResult", "SUITES", "run_suite", "case_rng", "worker_count"]

# brute-force rooted MAST enumerates label subsets; keep the shared set small
ROOTED_MAX_LABELS = 12
MIXED_MAX_N = 25


@dataclass
class SuiteResult:
    """Outcome of one suite run."""

    suite: str
    seed: int
    cases: int
    failures: int = 0
    counterexample: dict | None = None
    counters: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "cases": self.cases,
            "failures": self.failures,
            "counterexample": self.counterexample,
            "counters": self.counters,
            "elapsed": round(self.elapsed, 4),
        }


def case_rng(seed: int, index: int) -> np.random.Generator:
    """Generator of case ``index`` in the run seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def worker_count(requested: int | None = None) -> int:
    """Worker processes allowed, capped by ``AGREETREE_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("AGREETREE_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


def _add(acc: dict, extra: dict):
    for k, v in extra.items():
        if isinstance(v, (int, np.integer)):
            acc[k] = acc.get(k, 0) + int(v)


# ---------------------------------------------------------------------------
# Cavity matching
# ---------------------------------------------------------------------------

def _random_graph(rng, max_n):
    n = int(rng.integers(0, max_n + 1))
    nx = int(rng.integers(0, n + 1))
    p = float(rng.uniform(0.05, 0.9))
    wmax = int(rng.integers(1, 51))
    return oracle.random_bipartite(rng, nx, n - nx, p, wmax)


def _path_correspondence(g, m) -> bool:
    """Longest digraph paths equal the best alternating-path gains on both sides."""
    mat = oracle._weight_matrix(g)
    L = matching.longest_path_weights(matching.build_cavity_digraph(g, m))
    for u in range(g.nx):
        if m.mate_x[u] >= 0:
            gains = oracle.alternating_paths(mat, m.mate_x, m.mate_y, ("x", u))
            if max(gains.values()) != L[u]:
                return False
    gt = matching.WeightedBipartiteGraph(g.ny, g.nx)
    gt.ex, gt.ey, gt.ew = g.ey, g.ex, g.ew
    mt = matching.Matching(m.mate_y, m.mate_x, m.weight)
    Lt = matching.longest_path_weights(matching.build_cavity_digraph(gt, mt))
    for v in range(g.ny):
        if m.mate_y[v] >= 0:
            gains = oracle.alternating_paths(mat, m.mate_x, m.mate_y, ("y", v))
            if max(gains.values()) != Lt[v]:
                return False
    return True


def case_cavity(rng, max_n: int) -> tuple[dict | None, dict]:
    g = _random_graph(rng, max_n)
    n = g.nx + g.ny
    counters = {"nodes": n, "edges": g.m, "enumerated": 0, "paths_checked": 0}

    def fail(why):
        return {"why": why, "graph": matching.write_edge_list(g)}, counters

    try:
        res = matching.all_cavity(g)
    except matching.PositiveCycleError:
        return fail("positive cycle in cavity digraph")
    total, vx, vy = oracle.naive_all_cavity(g, enumerate_small=False)
    if res.mwm != total or res.values_x.tolist() != vx or res.values_y.tolist() != vy:
        return fail("all_cavity differs from per-node recomputation")
    if n <= 12:
        counters["enumerated"] = 1
        total, vx, vy = oracle.naive_all_cavity(g, enumerate_small=True)
        if res.mwm != total or res.values_x.tolist() != vx or res.values_y.tolist() != vy:
            return fail("all_cavity differs from matching enumeration")
    if n <= 8:
        counters["paths_checked"] = 1
        if not _path_correspondence(g, res.matching):
            return fail("digraph paths do not match alternating paths")
    return None, counters


# ---------------------------------------------------------------------------
# Rooted MAST and compression
# ---------------------------------------------------------------------------

def _rooted_pair(rng, max_n):
    k = int(rng.integers(1, max(1, min(max_n, ROOTED_MAX_LABELS)) + 1))
    shared = list(range(k))
    extra1 = [f"a{i}" for i in range(int(rng.integers(0, 3)))]
    extra2 = [f"b{i}" for i in range(int(rng.integers(0, 3)))]
    deg = [2, None, 3][int(rng.integers(0, 3))]
    unary = float(rng.choice([0.0, 0.0, 0.2]))
    t1 = oracle.random_rooted_tree(rng, shared + extra1, deg, unary=unary)
    t2 = oracle.random_rooted_tree(rng, shared + extra2, deg)
    return t1, t2


def case_rooted(rng, max_n: int):
    t1, t2 = _rooted_pair(rng, max_n)
    got, wit = rooted.rooted_witness(t1, t2)
    want = oracle.brute_mast_rooted(t1, t2)
    counters = {"labels": len(t1.leaf_labels() & t2.leaf_labels())}
    cx = {"t1": serialize_newick(t1), "t2": serialize_newick(t2), "got": int(got), "want": int(want)}
    if got != want:
        return dict(cx, why="mast_rooted differs from brute force"), counters
    if len(wit.leaf_labels()) != got or not oracle.validate_agreement(wit, t1, t2):
        return dict(cx, why="witness rejected", witness=serialize_newick(wit)), counters
    return None, counters


def _is_anc(t: Tree, a: int, b: int) -> bool:
    while b >= 0:
        if b == a:
            return True
        b = t.parent[b]
    return False


def case_compression(rng, max_n: int):
    k = int(rng.integers(2, max(2, min(max_n, 12)) + 1))
    labels = list(range(k))
    deg = [2, None, 3][int(rng.integers(0, 3))]
    t1 = oracle.random_rooted_tree(rng, labels, deg, unary=float(rng.choice([0.0, 0.15])))
    t2 = oracle.random_rooted_tree(rng, labels, deg)
    nodes = [v for v in range(t2.n) if v != t2.root]
    roots = None
    if rng.random() < 0.5:
        for _ in range(20):
            a, b = (int(v) for v in rng.choice(nodes, 2, replace=False))
            if not _is_anc(t2, a, b) and not _is_anc(t2, b, a):
                roots = [a, b]
                break
    if roots is None:
        roots = [int(rng.choice(nodes))]
    subs = [subtree_at(t2, v) for v in roots]
    inside = set().union(*(r.leaf_labels() for r in subs))
    w1 = compression.compress(t1, set(labels) - inside, subs,
                              lambda r: rooted.subtree_scores(t1, r))
    w2 = compression.shrink(t2, roots)
    got = rooted.mast_annotated(w1, w2)
    want = oracle.brute_mast_rooted(t1, t2)
    counters = {"two_subtree": int(len(roots) == 2)}
    if got != want:
        return {"why": "compressed pair changes the MAST", "t1": serialize_newick(t1),
                "t2": serialize_newick(t2), "roots": roots, "got": int(got),
                "want": int(want)}, counters
    return None, counters


# ---------------------------------------------------------------------------
# Unrooted and mixed
# ---------------------------------------------------------------------------

def _stats_counters(st) -> dict:
    d = st.as_dict()
    d["recursions"] = 1
    return d


def case_unrooted(rng, max_n: int, mode: str = "fast"):
    n = int(rng.integers(3, max(3, max_n) + 1))
    labels = list(range(n))
    deg = [3, None][int(rng.integers(0, 2))]
    u1 = oracle.random_unrooted_tree(rng, labels, deg)
    keep = [int(x) for x in rng.permutation(labels)[: max(3, int(n * rng.uniform(0.6, 1.0)))]]
    u2 = oracle.random_unrooted_tree(rng, keep, deg)
    st = unrooted.RecursionStats()
    got = unrooted.mast_unrooted(u1, u2, mode=mode, stats=st)
    want = oracle.naive_mast_unrooted(u1, u2)
    return _check_recursion("unrooted", u1, u2, got, want, st)


def case_mixed(rng, max_n: int, mode: str = "fast"):
    n = int(rng.integers(3, max(3, min(max_n, MIXED_MAX_N)) + 1))
    labels = list(range(n))
    deg = [3, None][int(rng.integers(0, 2))]
    arc = float(rng.uniform(0.0, 0.5))
    m1 = oracle.random_mixed_tree(rng, labels, arc, deg)
    m2 = oracle.random_mixed_tree(rng, [int(x) for x in rng.permutation(labels)], arc, deg)
    st = unrooted.RecursionStats()
    got = unrooted.mast_mixed(m1, m2, mode=mode, stats=st)
    want = oracle.naive_mast_mixed(m1, m2)
    return _check_recursion("mixed", m1, m2, got, want, st)


def _check_recursion(kind, a, b, got, want, st):
    counters = _stats_counters(st)
    cx = {"t1": serialize_newick(a), "t2": serialize_newick(b), "got": int(got), "want": int(want)}
    if got != want:
        return dict(cx, why=f"mast_{kind} differs from the rooting sweep"), counters
    if st.violations:
        return dict(cx, why="size discipline violated", detail=repr(st.violations[0])), counters
    if st.paranoid_mismatches:
        key, fast, ref = st.paranoid_mismatches[0]
        return dict(cx, why="fast annotation differs from reference", key=repr(key),
                    fast=fast, reference=ref), counters
    if st.bound_violations:
        return dict(cx, why="cavity array exceeds the distinct-value bound"), counters
    return None, counters


# ---------------------------------------------------------------------------
# Range queries
# ---------------------------------------------------------------------------

def random_index_instance(rng, max_h: int = 100, max_b: int = 50):
    """
    Random tree with one cavity array per node.

    Internal nodes get ``A_z[i] = mwm(K_z - column i)`` for a random
    ``d_z x b`` weight matrix ``K_z``; leaves get a constant array.
    Returns ``(tree, dense, arrays, degrees)``.
    """
    h = int(rng.integers(1, max_h + 1))
    b = int(rng.integers(1, max_b + 1))
    parent = [-1] + [int(rng.integers(0, v)) for v in range(1, h)]
    tree = Tree.from_parents(parent, [None] * h)
    dense = np.zeros((h, b), dtype=np.int64)
    arrays = []
    for z in range(h):
        d = len(tree.children[z])
        if d == 0:
            dense[z] = int(rng.integers(0, 30))
        else:
            K = rng.integers(0, 20, size=(d, b)) * (rng.random((d, b)) < 0.4)
            edges = [(int(i), int(j), int(K[i, j])) for i, j in zip(*np.nonzero(K))]
            g = matching.WeightedBipartiteGraph(d, b, edges)
            dense[z] = matching.all_cavity(g).values_y
        vals, counts = np.unique(dense[z], return_counts=True)
        arr = rangequery.SparseArray(b, int(vals[np.argmax(counts)]))
        for i in np.nonzero(dense[z] != arr.default)[0]:
            arr[int(i)] = int(dense[z, i])
        arrays.append(arr)
    return tree, dense, arrays, [len(c) for c in tree.children]


def case_rangequery(rng, max_n: int):
    tree, dense, arrays, deg = random_index_instance(rng, min(100, max(1, 4 * max_n)), 50)
    counters = {"rows": tree.n, "columns": dense.shape[1], "queries": 0}
    for z in range(tree.n):
        if len(np.unique(dense[z])) > deg[z] + 1:
            return {"why": "array has more than d_z+1 distinct values", "node": z,
                    "row": dense[z].tolist()}, counters
    pre = preorder_index(tree)
    idx = rangequery.build_subtree_index(arrays, pre)
    for v in range(tree.n):
        p = pre.number[v]
        rows = [pre.node_at[r] for r in range(p, p + pre.desc_count[v] + 1)]
        want = dense[rows].max(axis=0)
        for i in range(dense.shape[1]):
            counters["queries"] += 1
            got = rangequery.query_subtree_max(idx, v, i)
            if got != want[i]:
                return {"why": "subtree max differs from scan", "v": v, "i": i,
                        "got": got, "want": int(want[i]), "parents": tree.parent}, counters
    return None, counters


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

SUITES: dict[str, Callable] = {
    "cavity": case_cavity,
    "rooted": case_rooted,
    "compression": case_compression,
    "rangequery": case_rangequery,
    "unrooted": case_unrooted,
    "mixed": case_mixed,
}


def _run_chunk(args):
    name, seed, indices, max_n, kw = args
    fn = SUITES[name]
    counters: dict = {}
    for i in indices:
        cx, extra = fn(case_rng(seed, i), max_n, **kw)
        _add(counters, extra)
        if cx is not None:
            return i, cx, counters
    return None, None, counters


def run_suite(name: str, seed: int, cases: int, max_n: int, workers: int | None = None,
              **kw) -> SuiteResult:
    """
    Run ``cases`` seeded cases of suite ``name``.

    Stops at the first failing case; its index and data are stored in the
    result together with the summed counters of the cases that ran.
    """
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    t0 = time.perf_counter()
    res = SuiteResult(name, seed, 0)
    nw = worker_count(workers)
    if nw > 1 and cases > 1:
        chunks = [list(range(k, cases, nw)) for k in range(nw)]
        with ProcessPoolExecutor(nw) as pool:
            outs = list(pool.map(_run_chunk, [(name, seed, c, max_n, kw) for c in chunks]))
        bad = [(i, cx) for i, cx, _ in outs if i is not None]
        for _, _, c in outs:
            _add(res.counters, c)
        res.cases = cases
        if bad:
            i, cx = min(bad, key=lambda p: p[0])
            res.failures = len(bad)
            res.counterexample = dict(cx, case=i)
    else:
        for i in range(cases):
            cx, extra = SUITES[name](case_rng(seed, i), max_n, **kw)
            _add(res.counters, extra)
            res.cases += 1
            if cx is not None:
                res.failures = 1
                res.counterexample = dict(cx, case=i)
                break
    res.elapsed = time.perf_counter() - t0
    return res
