"""
Unrooted and mixed maximum agreement subtrees by label compression.

``mast_unrooted`` splits the first tree at a separator ``x`` and handles
three cases: agreement subtrees whose root maps to ``x`` against a rooting
of the second tree at one of its nodes (case 1) or at an edge midpoint
(case 2, via dummy nodes), and subtrees confined to one component of
``U1 - x`` (case 3, by recursion).  Cases 1 and 2 call :func:`mast_wx`,
which separates the second tree instead and recurses on compressed/shrunk
pairs ``(W_i, X_i)`` that keep at most two shrunk leaves.

Annotations of every ``W_i`` come from one of two implementations:

``fast``
    cavity-matching arrays, subtree-maximum indices and attachment queries
    over the table ``mast(W, X^y)``;
``reference``
    direct compression of the uncompressed rooted tree against the expanded
    subtrees of the base tree, scored with the rooted dynamic program;
``paranoid``
    both, compared value by value.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .compression import (
    ATOMIC,
    AUX_INTERNAL,
    AUX_LEAF,
    COMP_INTERNAL,
    COMP_LEAF,
    ORDINARY,
    AnnotatedTree,
    Member,
    ShrunkTree,
    _set_leaf,
    assemble_leaf,
    canonical_form,
    compress,
    plain_annotated,
)
from .matching import WeightedBipartiteGraph, all_cavity
from .rangequery import NEG, AttachmentIndex, SparseArray, build_subtree_index
from .rooted import MastStats, _mwm_value, _pair_children, mast_table, subtree_scores
from .tree import (
    Tree,
    _subgraph,
    components_without,
    find_separator,
    insert_dummy_nodes,
    preorder_index,
    restrict_labels,
    root_at,
)

__all__ = [
    "MODES",
    "RecursionStats",
    "Subproblem",
    "CavityArrays",
    "mast_unrooted",
    "mast_mixed",
    "mast_wx",
    "new_subproblems",
    "recursion_context",
    "build_cavity_arrays",
    "rebuild_subproblem_topology",
    "expand_subtree",
    "aux_zero_shrunk",
    "aux_one_shrunk",
    "aux_two_shrunk",
]

MODES = ("fast", "reference", "paranoid")


@dataclass
class RecursionStats:
    """Counters and audit results collected over one or more runs."""

    top_calls: int = 0
    wx_calls: int = 0
    spawns: int = 0
    subproblems: int = 0
    skipped: int = 0
    max_depth: int = 0
    cavity_graphs: int = 0
    index_cells: int = 0
    aux_values: int = 0
    bound_checks: int = 0
    bound_violations: int = 0
    paranoid_checked: int = 0
    paranoid_mismatches: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    dp: MastStats = field(default_factory=MastStats)

    def as_dict(self) -> dict:
        return {
            "top_calls": self.top_calls,
            "wx_calls": self.wx_calls,
            "spawns": self.spawns,
            "subproblems": self.subproblems,
            "skipped": self.skipped,
            "max_depth": self.max_depth,
            "cavity_graphs": self.cavity_graphs,
            "index_cells": self.index_cells,
            "aux_values": self.aux_values,
            "paranoid_checked": self.paranoid_checked,
            "paranoid_mismatches": len(self.paranoid_mismatches),
            "violations": len(self.violations),
            "dp_calls": self.dp.calls,
            "node_pairs": self.dp.node_pairs,
            "matchings": self.dp.matchings,
        }


@dataclass
class Subproblem:
    """A compressed/shrunk pair with the cut that produced it."""

    w: AnnotatedTree
    x: ShrunkTree
    cut: tuple  # (v_i, y) in base-tree ids
    size: int   # nodes of the component C_i


class _Ctx:
    def __init__(self, t: Tree, base: Tree, mode: str, stats: RecursionStats, leaf_size: int):
        self.t = t
        self.base = base
        self.mode = mode
        self.stats = stats
        self.leaf_size = leaf_size
        self._expanded: dict = {}
        self._scores: dict = {}

    def scores(self, key):
        """``mast(T^v, B^key)`` for all nodes ``v`` of ``T`` (cached)."""
        if key not in self._scores:
            r = self.expanded(key)
            self._scores[key] = subtree_scores(self.t, r)
        return self._scores[key]

    def expanded(self, key):
        if key not in self._expanded:
            self._expanded[key] = expand_subtree(self.base, key)
        return self._expanded[key]


def recursion_context(t: Tree, base: Tree, mode: str = "fast",
                      stats: RecursionStats | None = None, leaf_size: int = 2) -> _Ctx:
    """
    Context for :func:`new_subproblems`.

    ``t`` is the uncompressed rooted tree behind the annotated tree and
    ``base`` the unrooted tree whose oriented edges the shrunk leaves name.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    return _Ctx(t, base, mode, stats if stats is not None else RecursionStats(), leaf_size)


def _default_mode() -> str:
    mode = os.environ.get("AGREETREE_AUX", "fast")
    return mode if mode in MODES else "fast"


def _strip(t: Tree) -> Tree:
    return Tree(t.adj, t.labels, root=t.root, arcs=t.arcs, dummy=t.dummy)


def expand_subtree(base: Tree, key: tuple) -> Tree | None:
    """
    The rooted subtree ``base^{ab}`` for ``key = (a, b)``: the side of ``b``
    away from ``a``, rooted at ``b``, keeping only nodes consistent with
    ``a``.  ``None`` if the edge cannot be walked from ``a``.
    """
    a, b = key
    if not base.passable(a, b):
        return None
    sub = _subgraph(base, _expand_nodes(base, a, b), root=b, keep_arcs=False)
    return _strip(sub)


def _expand_nodes(t: Tree, a: int, b: int) -> list[int]:
    keep = [b]
    seen = {a, b}
    for v in keep:
        for w in t.adj[v]:
            if w not in seen and (w, v) not in t.arcs:
                seen.add(w)
                keep.append(w)
    return keep


# ---------------------------------------------------------------------------
# Top level
# ---------------------------------------------------------------------------

def mast_unrooted(u1: Tree, u2: Tree, mode: str | None = None,
                  stats: RecursionStats | None = None, leaf_size: int = 2) -> int:
    """
    Size of a maximum agreement subtree of two unrooted trees.

    Parameters
    ----------
    u1, u2 : Tree
        Unrooted trees without directed edges.
    mode : {"fast", "reference", "paranoid"}, optional
        How subproblem annotations are produced (default from the
        ``AGREETREE_AUX`` environment variable, else ``"fast"``).
    stats : RecursionStats, optional
        Receives counters and audit results.
    leaf_size : int
        Subproblems whose shrunk tree has at most this many nodes are
        evaluated by sweeping all of their rootings.
    """
    if u1.root is not None or u2.root is not None:
        raise ValueError("mast_unrooted takes unrooted trees")
    if u1.arcs or u2.arcs:
        raise ValueError("trees with directed edges go through mast_mixed")
    return _run(u1, u2, mode, stats, leaf_size)


def mast_mixed(m1: Tree, m2: Tree, mode: str | None = None,
               stats: RecursionStats | None = None, leaf_size: int = 2) -> int:
    """Maximum agreement over consistent rootings of two mixed trees."""
    if m1.root is not None or m2.root is not None:
        raise ValueError("mast_mixed takes unrooted (mixed) trees")
    return _run(m1, m2, mode, stats, leaf_size)


def _run(u1, u2, mode, stats, leaf_size):
    mode = mode or _default_mode()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    st = stats if stats is not None else RecursionStats()
    return _mast_top(_strip(u1), _strip(u2), mode, st, leaf_size)


def _consistent_from(t: Tree, u: int, want: set) -> set:
    got = set()
    seen = {u}
    stack = [u]
    while stack:
        v = stack.pop()
        if t.labels[v] in want:
            got.add(t.labels[v])
        for w in t.adj[v]:
            if w not in seen and (w, v) not in t.arcs:
                seen.add(w)
                stack.append(w)
    return got


def _tiny(u1: Tree, u2: Tree, shared: set, cand=None) -> int:
    """At most two shared labels: the best set consistent with a root of each tree."""
    def roots(t, allowed=None):
        inner = [v for v in range(t.n) if t.labels[v] is None]
        if allowed is not None:
            return [v for v in inner if v in allowed]
        return inner if inner else list(range(t.n))

    r1 = [_consistent_from(u1, u, shared) for u in roots(u1, cand)]
    r2 = [_consistent_from(u2, u, shared) for u in roots(u2)]
    best = 0
    for a in r1:
        for b in r2:
            best = max(best, len(a & b))
    return best


def _candidate_separator(t: Tree, cand: set) -> int:
    """Candidate minimising the largest number of candidates left in a component."""
    order, parent = [0], [-1] * t.n
    seen = {0}
    for v in order:
        for w in t.adj[v]:
            if w not in seen:
                seen.add(w)
                parent[w] = v
                order.append(w)
    below = [0] * t.n
    for v in reversed(order):
        below[v] += 1 if v in cand else 0
        if parent[v] >= 0:
            below[parent[v]] += below[v]
    total = below[0]
    best, arg = None, None
    for v in order:
        if v not in cand:
            continue
        parts = [below[w] for w in t.adj[v] if w != parent[v]]
        parts.append(total - below[v])
        worst = max(parts)
        if best is None or worst < best:
            best, arg = worst, v
    return arg


def _mast_top(u1: Tree, u2: Tree, mode: str, st: RecursionStats, leaf_size: int,
              cand: set | None = None) -> int:
    st.top_calls += 1
    shared = u1.leaf_labels() & u2.leaf_labels()
    if len(shared) <= 2:
        return _tiny(u1, u2, shared, cand)
    directed = bool(u1.arcs or u2.arcs)
    r1 = restrict_labels(u1, shared)
    keep = [k for k in range(r1.n) if r1.labels[k] is None
            and (cand is None or r1.orig[k] in cand)]
    if not keep:
        return 0
    u1 = _strip(r1)
    u2 = _strip(restrict_labels(u2, shared))
    if cand is None and not directed:
        x = find_separator(u1)
    else:
        x = _candidate_separator(u1, set(keep))
    t = _strip(root_at(u1, x))
    if directed:
        # dropping inconsistent nodes can leave unary chains and bare leaves
        t = _strip(restrict_labels(t, t.leaf_labels()))
    labs = t.leaf_labels()
    best = 0
    if 0 < len(labs) <= 2:
        # every pair agrees; restricting u2 this far could drop its roots
        for r in range(u2.n):
            if u2.labels[r] is None:
                best = max(best, len(_consistent_from(u2, r, labs)))
    elif labs:
        base = _strip(restrict_labels(u2, labs))
        if base.n >= 3:
            best = _start(t, base, mode, st, leaf_size)
        if base.n >= 2 and not directed:
            # midpoints stand in for degree-2 nodes removed by contraction
            best = max(best, _start(t, _strip(insert_dummy_nodes(base)), mode, st, leaf_size))
        elif base.n == 1:
            best = max(best, 1)
    keep = set(keep)
    for v, comp in components_without(u1, x):
        inner = [u for u in comp if u in keep]
        if not inner:
            continue
        nodes = list(comp)
        if directed and u1.passable(v, x):
            # roots inside comp still see what lies consistently beyond x
            nodes.extend(_expand_nodes(u1, v, x))
        sub = _strip(_subgraph(u1, nodes))
        if len(sub.leaf_labels()) <= best:
            continue
        sub_cand = None
        if directed:
            index = {u: k for k, u in enumerate(nodes)}
            sub_cand = {index[u] for u in inner}
        best = max(best, _mast_top(sub, u2, mode, st, leaf_size, sub_cand))
    return best


def _start(t: Tree, base: Tree, mode: str, st: RecursionStats, leaf_size: int) -> int:
    ctx = _Ctx(t, base, mode, st, leaf_size)
    w = plain_annotated(t)
    x = ShrunkTree(base, [0] * base.n, {}, list(range(base.n)))
    return _mast_wx(w, x, ctx, 0, None)


def mast_wx(w: AnnotatedTree, x: ShrunkTree, t: Tree | None = None, base: Tree | None = None,
            mode: str = "fast", stats: RecursionStats | None = None, leaf_size: int = 2) -> int:
    """
    Maximum over internal rootings ``z`` of ``x`` of ``mast(w, x^z)``.

    ``t`` (the uncompressed rooted tree behind ``w``) and ``base`` (the tree
    the shrunk leaves of ``x`` refer to) are required by the reference path;
    with a plain ``w`` and an unshrunk ``x`` they default to ``w`` and ``x``.
    """
    st = stats if stats is not None else RecursionStats()
    if t is None:
        if w.form != 0:
            raise ValueError("the reference tree is needed for compressed input")
        t = w.as_tree()
        w = plain_annotated(t)
    if base is None:
        if x.shrunk():
            raise ValueError("the base tree is needed for shrunk input")
        base = x.tree
        x = ShrunkTree(base, x.slot, {}, list(range(base.n)))
    ctx = _Ctx(t, base, mode, st, leaf_size)
    return _mast_wx(w, x, ctx, 0, None)


# ---------------------------------------------------------------------------
# The recursion on (W, X)
# ---------------------------------------------------------------------------

def _tree_path(t: Tree, a: int, b: int) -> list[int]:
    prev = {a: -1}
    queue = [a]
    for v in queue:
        if v == b:
            break
        for w in t.adj[v]:
            if w not in prev:
                prev[w] = v
                queue.append(w)
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return path[::-1]


def _closest_on_path(t: Tree, y: int, path: list[int]) -> int:
    on = set(path)
    seen = {y}
    queue = [y]
    for v in queue:
        if v in on:
            return v
        for w in t.adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    raise AssertionError("path not reachable")


def _choose_y(x: ShrunkTree) -> int:
    y = find_separator(x.tree)
    sh = x.shrunk()
    if len(sh) == 2:
        path = _tree_path(x.tree, sh[1], sh[2])
        if y not in path:
            y = _closest_on_path(x.tree, y, path)
    return y


def _mast_wx(w: AnnotatedTree, x: ShrunkTree, ctx: _Ctx, depth: int, parent_size) -> int:
    st = ctx.stats
    st.wx_calls += 1
    st.max_depth = max(st.max_depth, depth)
    n = x.n
    if n < 3 or w.n == 0:
        return 0
    if n <= ctx.leaf_size:
        best = 0
        for z in x.tree.internal_nodes():
            best = max(best, mast_table(w, x.rooted_at(z), st.dp).value)
        return best
    y = _choose_y(x)
    xy = x.rooted_at(y)
    tab = mast_table(w, xy, st.dp)
    best = tab.value
    subs = new_subproblems(w, x, y, ctx=ctx, xy=xy, tab=tab)
    _audit(st, x, subs, parent_size)
    for sp in subs:
        best = max(best, _mast_wx(sp.w, sp.x, ctx, depth + 1, n))
    return best


def _audit(st: RecursionStats, x: ShrunkTree, subs: list, parent_size):
    n = x.n
    st.spawns += 1
    st.subproblems += len(subs)
    big = [sp for sp in subs if sp.size > n / 2]
    if len(big) > 1:
        st.violations.append(("oversize-count", n, [sp.size for sp in subs]))
    for sp in big:
        if len(sp.x.shrunk()) != 1:
            st.violations.append(("oversize-shrunk", n, sp.size))
    if sum(sp.size for sp in subs) > n:
        st.violations.append(("total-size", n, [sp.size for sp in subs]))
    if parent_size is not None:
        for sp in subs:
            if sp.size > parent_size / 2:
                st.violations.append(("two-level", parent_size, n, sp.size))


class _Target:
    """One component ``C_i`` of ``X - y`` that yields a subproblem."""

    __slots__ = ("i", "v", "nodes", "olds", "slot", "labels", "passable", "pos", "x")

    def __init__(self, i, v, nodes, olds, slot, labels, passable, pos):
        self.i, self.v, self.nodes, self.olds = i, v, nodes, olds
        self.slot, self.labels, self.passable, self.pos = slot, labels, passable, pos
        self.x = None


def _build_x(x: ShrunkTree, y: int, tg: _Target) -> ShrunkTree:
    t = x.tree
    keep = tg.nodes
    index = {v: k for k, v in enumerate(keep)}
    adj = [[index[w] for w in t.adj[v] if w in index] for v in keep]
    labels = [t.labels[v] for v in keep]
    slot = [x.slot[v] for v in keep]
    borig = [x.borig[v] for v in keep]
    arcs = [(index[a], index[b]) for a, b in t.arcs if a in index and b in index]
    g = len(keep)
    vi = index[tg.v]
    adj[vi].append(g)
    adj.append([vi])
    labels.append(None)
    slot.append(tg.slot)
    borig.append(-1)
    if (tg.v, y) in t.arcs:
        arcs.append((vi, g))
    elif (y, tg.v) in t.arcs:
        arcs.append((g, vi))
    keys = {s: x.keys[s] for s in tg.olds}
    keys[tg.slot] = (x.borig[tg.v], x.borig[y])
    return ShrunkTree(Tree(adj, labels, arcs=arcs), slot, keys, borig)


def new_subproblems(w: AnnotatedTree, x: ShrunkTree, y: int, ctx: _Ctx | None = None,
                    xy: ShrunkTree | None = None, tab=None) -> list[Subproblem]:
    """
    Subproblems ``(W_i, X_i)`` for the components of ``x - y``.

    Components without internal nodes are skipped (no rooting lies in them).
    Components holding shrunk leaves come last, as in the two-leaf
    conventions of the annotations.
    """
    if len(x.tree.adj[y]) < 2:
        raise ValueError("y must be an internal node")
    if ctx is None:
        raise ValueError("a recursion context is required")
    st = ctx.stats
    if xy is None:
        xy = x.rooted_at(y)
    if tab is None:
        tab = mast_table(w, xy, st.dp)
    t = x.tree
    sh = x.shrunk()
    where = {g: s for s, g in sh.items()}
    kids = xy.tree.children[xy.tree.root]
    pos_of = {xy.tree.orig[c]: k for k, c in enumerate(kids)}
    targets = []
    for i, (v, nodes) in enumerate(components_without(t, y)):
        if not any(len(t.adj[u]) >= 2 for u in nodes):
            st.skipped += 1
            continue
        olds = {where[u]: u for u in nodes if u in where}
        if len(olds) > 1:
            raise AssertionError("y must separate the two shrunk leaves")
        slot = 1 if not olds else 3 - next(iter(olds))
        labels = {t.labels[u] for u in nodes if t.labels[u] is not None}
        targets.append(_Target(i, v, nodes, olds, slot, labels, t.passable(v, y), pos_of.get(v, -1)))
    targets.sort(key=lambda tg: (1 if tg.olds else 0, 1 if 2 in tg.olds else 0, tg.i))
    for tg in targets:
        tg.x = _build_x(x, y, tg)
    if not targets:
        return []
    mode = ctx.mode
    fast = ref = None
    if mode in ("fast", "paranoid"):
        fast = _fast_annotations(w, x, y, xy, tab, targets, st)
    if mode in ("reference", "paranoid"):
        ref = {tg.i: _reference_w(ctx, tg) for tg in targets}
    out = []
    for tg in targets:
        if mode == "paranoid":
            a, b = canonical_form(fast[tg.i]), canonical_form(ref[tg.i])
            st.paranoid_checked += _count_values(ref[tg.i])
            if a != b:
                st.paranoid_mismatches.append((tg.x.keys, a, b))
        wi = ref[tg.i] if ref is not None else fast[tg.i]
        out.append(Subproblem(wi, tg.x, tg.x.keys[tg.slot], len(tg.nodes)))
    return out


def _count_values(w: AnnotatedTree) -> int:
    per = {ORDINARY: w.form, COMP_INTERNAL: w.form + (1 if w.form == 2 else 0)}
    cnt = 0
    for v in range(w.n):
        k = w.kind[v]
        if k in per:
            cnt += per[k]
        elif k == COMP_LEAF:
            cnt += 1 if w.form == 1 else (5 if w.leaf_case[v] == 1 else 6) - 1
    return cnt


def _reference_w(ctx: _Ctx, tg: _Target) -> AnnotatedTree:
    """``W_i`` compressed from scratch out of the uncompressed tree."""
    keys = tg.x.keys
    form = len(keys)
    rs = [ctx.expanded(keys[s]) for s in range(1, form + 1)]
    memo = {}
    for s in range(1, form + 1):
        memo[id(rs[s - 1])] = ctx.scores(keys[s])

    def oracle(r):
        got = memo.get(id(r))
        return got if got is not None else subtree_scores(ctx.t, r)

    w = compress(ctx.t, tg.labels, rs, oracle)
    # annotate provenance on top of the fresh tree's own T-node ids
    return w



# ---------------------------------------------------------------------------
# Cavity arrays
# ---------------------------------------------------------------------------

_SMALL_COLS = 8


def _mwm_small(rows: list) -> int:
    """Maximum matching value of a one- or two-row nonnegative matrix."""
    if not rows or not rows[0]:
        return 0
    if len(rows) == 1:
        return max(rows[0])
    a, b = rows
    best = max(max(a), max(b))
    ia = sorted(range(len(a)), key=a.__getitem__, reverse=True)[:2]
    ib = sorted(range(len(b)), key=b.__getitem__, reverse=True)[:2]
    for i in ia:
        for j in ib:
            if i != j and a[i] + b[j] > best:
                best = a[i] + b[j]
    return best


def _cavity_of(mat: np.ndarray) -> tuple[int, list]:
    """``mwm`` of a dense nonnegative matrix and the value with each column removed."""
    nr, nc = mat.shape
    if nr == 0 or nc == 0:
        return 0, [0] * nc
    if nr <= 2 and nc <= _SMALL_COLS:
        rows = mat.tolist()
        full = _mwm_small(rows)
        return full, [_mwm_small([r[:k] + r[k + 1:] for r in rows]) for k in range(nc)]
    ii, jj = np.nonzero(mat)
    g = WeightedBipartiteGraph(nr, nc, np.column_stack([ii, jj, mat[ii, jj]]))
    res = all_cavity(g)
    return int(res.mwm), [int(v) for v in res.values_y]


def _cavity_two_rows(rows: np.ndarray) -> tuple[int, dict]:
    """
    Cavity values of a one- or two-row matrix as ``(mwm, {column: value})``.

    Removing a column outside the three best entries of each row leaves the
    optimum unchanged, so only those columns are evaluated.
    """
    nc = rows.shape[1]
    k = min(3, nc)
    tops = [np.argpartition(-r, k - 1)[:k] if nc > k else np.arange(nc) for r in rows]
    cand = sorted({int(c) for t in tops for c in t})
    lists = [[(int(r[c]), int(c)) for c in t if r[c] > 0] for r, t in zip(rows, tops)]

    def best(skip):
        vals = [[(v, c) for v, c in lst if c != skip] for lst in lists]
        top = max((v for lst in vals for v, _ in lst), default=0)
        if len(vals) == 2:
            for va, ca in vals[0]:
                for vb, cb in vals[1]:
                    if ca != cb and va + vb > top:
                        top = va + vb
        return top

    full = best(-1)
    over = {}
    for c in cand:
        v = best(c)
        if v != full:
            over[c] = v
    return full, over


@dataclass
class CavityArrays:
    """Per-node arrays ``A_z[i]`` = root term of ``z`` with column ``i`` removed."""

    arrays: list
    zmax: list
    kappa: list
    graphs: int = 0
    bound_checks: int = 0
    bound_violations: int = 0


def _reduced_matrix(S: np.ndarray, counts: np.ndarray):
    """
    Columns kept by the max-child rule: everything touched by a non-maximal
    child plus the two best remaining columns of the maximal child.
    """
    zi = int(np.argmax(counts))
    others = np.ones(len(counts), dtype=bool)
    others[zi] = False
    touched = (S[others] > 0).any(axis=0) if others.any() else np.zeros(S.shape[1], dtype=bool)
    zrow = S[zi]
    free = np.nonzero((zrow > 0) & ~touched)[0]
    if len(free) > 2:
        free = free[np.argsort(-zrow[free], kind="stable")[:2]]
    keep = touched.copy()
    keep[free] = True
    cols = np.nonzero(keep)[0]
    return S[:, cols], cols, zi, int(counts[others].sum())


def _yc_terms(w: AnnotatedTree, z: int) -> list:
    """Meeting-node terms of ``z`` that depend on the removed column: (bonus, rows)."""
    kind = w.kind[z]
    if kind == ORDINARY:
        zz, zb = _pair_children(w, z)
        if zz >= 0 and zb >= 0 and w.beta[zz] > 0:
            return [(int(w.beta[zz]), [c for c in w.children[z] if c not in (zz, zb)])]
    elif kind == COMP_INTERNAL:
        zz, _ = _pair_children(w, z)
        pbar = next((c for c in w.children[z] if w.kind[c] == AUX_INTERNAL), -1)
        if zz >= 0 and pbar >= 0 and w.beta[zz] > 0:
            return [(int(w.beta[zz]), [pbar])]
    return []


def build_cavity_arrays(w: AnnotatedTree, K: np.ndarray, yc=None) -> CavityArrays:
    """
    Arrays of the cavity values of the graphs ``G_z``.

    Parameters
    ----------
    w : AnnotatedTree
    K : ndarray, shape (w.n, b)
        ``K[u, i]`` is the score of node ``u`` against the ``i``-th child of
        the root of the second tree.
    yc : tuple (excluded, const), optional
        When the root of the second tree is the meeting node of two shrunk
        leaves: positions of the two branches holding them and a per-node
        constant for terms that do not depend on the removed column.
    """
    n, b = K.shape
    counts = w.atomic_count()
    out = CavityArrays([None] * n, [-1] * n, [0] * n)
    other = None
    if yc is not None:
        excl, const = yc
        other = np.asarray([k for k in range(b) if k not in excl], dtype=np.int64)
    live_rows = K.any(axis=1).tolist()
    top = K.argmax(axis=1).tolist() if b else [0] * n
    empty = SparseArray(b, 0)
    cnt = counts.tolist()
    for z in range(n):
        chs = w.children[z]
        default, over = 0, {}
        if not chs and yc is None:
            out.arrays[z] = empty
            continue
        if chs and w.kind[z] in (ORDINARY, COMP_INTERNAL):
            live = [c for c in chs if live_rows[c]]
            if len(live) <= 2:
                zm = max(chs, key=cnt.__getitem__)
                out.zmax[z] = zm
                out.kappa[z] = sum(cnt[c] for c in chs) - cnt[zm]
                if len(live) == 1:
                    out.graphs += 1
                    c = live[0]
                    row = K[c]
                    default = int(row[top[c]])
                    masked = row.copy()
                    masked[top[c]] = 0
                    second = int(masked.max())
                    if second != default:
                        over = {top[c]: second}
                elif live:
                    out.graphs += 1
                    default, over = _cavity_two_rows(K[live])
            else:
                ch = np.asarray(chs, dtype=np.int64)
                sub, cols, zi, kappa = _reduced_matrix(K[ch], counts[ch])
                out.zmax[z], out.kappa[z] = chs[zi], kappa
                out.graphs += 1
                default, cav = _cavity_of(sub)
                over = {int(c): v for c, v in zip(cols, cav) if v != default}
            if yc is None:
                out.bound_checks += 1
                if len(set(over.values())) + 1 > len(chs) + 1:
                    out.bound_violations += 1
        if yc is not None:
            terms = [(default, over)]
            for bonus, rows in _yc_terms(w, z):
                m, cav = _cavity_of(K[np.asarray(rows, dtype=np.int64)][:, other]) if rows else (0, [])
                terms.append((bonus + m, {int(other[j]): bonus + v for j, v in enumerate(cav) if v != m}))
            cz = int(const[z])
            default = max(cz, max(t[0] for t in terms))
            keys = set()
            for t in terms:
                keys.update(t[1])
            over = {}
            for c in keys:
                val = max(cz, max(t[1].get(c, t[0]) for t in terms))
                if val != default:
                    over[c] = val
        arr = SparseArray(b, default)
        for c, v in over.items():
            arr[c] = v
        out.arrays[z] = arr
    return out



# ---------------------------------------------------------------------------
# Annotations from the table mast(W, X^y)
# ---------------------------------------------------------------------------

class _Lift:
    """Depths, ancestors and lowest common ancestors on an annotated tree."""

    def __init__(self, w: AnnotatedTree):
        n = w.n
        self.w = w
        self.pre = preorder_index(w)
        par = np.asarray(w.parent, dtype=np.int64)
        par[0] = 0
        depth = np.zeros(n, dtype=np.int64)
        for v in w.preorder()[1:]:
            depth[v] = depth[w.parent[v]] + 1
        self.depth = depth
        self.up = [par]
        while (1 << len(self.up)) < n:
            self.up.append(self.up[-1][self.up[-1]])
        self.child_no = [0] * n
        self.nonaux = [0] * n
        for u in range(n):
            for k, c in enumerate(w.children[u], start=1):
                self.child_no[c] = k
                if w.kind[c] != AUX_LEAF:
                    self.nonaux[u] += 1
        self.leaf = {w.label[v]: v for v in range(n) if w.kind[v] == ATOMIC}
        # first node at or below v (along single-child chains) with a hanging child
        self.down = list(range(n))
        for v in w.postorder():
            if self.nonaux[v] == 1:
                c = next(c for c in w.children[v] if w.kind[c] != AUX_LEAF)
                self.down[v] = self.down[c]

    def anc(self, v: int, d: int) -> int:
        diff = int(self.depth[v]) - d
        k = 0
        while diff:
            if diff & 1:
                v = int(self.up[k][v])
            diff >>= 1
            k += 1
        return v

    def lca(self, a: int, b: int) -> int:
        if self.depth[a] < self.depth[b]:
            a, b = b, a
        a = self.anc(a, int(self.depth[b]))
        if a == b:
            return a
        for k in range(len(self.up) - 1, -1, -1):
            ua, ub = int(self.up[k][a]), int(self.up[k][b])
            if ua != ub:
                a, b = ua, ub
        return int(self.up[0][a])

    def is_anc(self, a: int, v: int) -> bool:
        pa, pv = self.pre.number[a], self.pre.number[v]
        return pa <= pv <= pa + self.pre.desc_count[a]

    def virtual(self, leaves: list) -> tuple[list, dict]:
        """Leaves, their pairwise LCAs and the root, in preorder, with parents."""
        num = self.pre.number
        nodes = sorted(set(leaves), key=num.__getitem__)
        extra = [self.lca(nodes[k], nodes[k + 1]) for k in range(len(nodes) - 1)]
        nodes = sorted(set(nodes) | set(extra) | {0}, key=num.__getitem__)
        par, stack = {}, []
        for v in nodes:
            while stack and not self.is_anc(stack[-1], v):
                stack.pop()
            par[v] = stack[-1] if stack else -1
            stack.append(v)
        return nodes, par


class _Spawn:
    """Shared state for the annotations of one call of ``new_subproblems``."""

    def __init__(self, w: AnnotatedTree, tab, st: RecursionStats):
        self.w = w
        self.st = st
        self.M = tab.table.astype(np.int64)
        self.prep = tab.prep
        self.root = tab.prep.root
        self.kids = list(tab.prep.children[self.root])
        self.score = self.M[:, self.root]
        self._lift = self._attach = self._index = None

    @property
    def lift(self) -> _Lift:
        if self._lift is None:
            self._lift = _Lift(self.w)
        return self._lift

    @property
    def attach(self) -> AttachmentIndex:
        if self._attach is None:
            self._attach = AttachmentIndex(self.w, self.score.tolist())
        return self._attach

    def index(self, yc: bool):
        """Subtree-maximum index over the cavity arrays (built once)."""
        if self._index is None:
            K = self.M[:, self.kids]
            extra = None
            if yc:
                prep = self.prep
                excl = {self.kids.index(prep.y1), self.kids.index(prep.y2)}
                extra = (excl, self._yc_const())
            cav = build_cavity_arrays(self.w, K, extra)
            st = self.st
            st.cavity_graphs += cav.graphs
            st.bound_checks += cav.bound_checks
            st.bound_violations += cav.bound_violations
            idx = build_subtree_index(cav.arrays, self.lift.pre)
            st.index_cells += idx.cell_reads
            order = np.argsort(-K, axis=1, kind="stable")
            n = K.shape[0]
            top1 = K[np.arange(n), order[:, 0]]
            top2 = K[np.arange(n), order[:, 1]] if K.shape[1] > 1 else np.zeros(n, dtype=np.int64)
            self._index = (idx, order[:, 0], top1, top2)
        return self._index

    def _yc_const(self) -> np.ndarray:
        w, M, prep = self.w, self.M, self.prep
        const = np.zeros(w.n, dtype=np.int64)
        for z in range(w.n):
            kind = w.kind[z]
            if kind == COMP_LEAF:
                const[z] = w.alphap[z]
            elif kind == COMP_INTERNAL:
                best = int(w.alphap[z])
                zz, _ = _pair_children(w, z)
                pbar = next((c for c in w.children[z] if w.kind[c] == AUX_INTERNAL), -1)
                if zz >= 0 and pbar >= 0:
                    wn = next((c for c in w.children[pbar] if w.kind[c] != AUX_LEAF), -1)
                    if w.beta12[zz] > 0:
                        m = int(M[wn, prep.sp2].max()) if (wn >= 0 and prep.sp2) else 0
                        best = max(best, int(w.beta12[zz]) + m)
                    if w.beta21[zz] > 0:
                        m = int(M[wn, prep.sp1].max()) if (wn >= 0 and prep.sp1) else 0
                        best = max(best, int(w.beta21[zz]) + m)
                const[z] = best
        return const

    def f(self, v: int, tg: _Target, yc: bool) -> int:
        """``mast(W^v, R_i)`` for a target without shrunk leaves."""
        if not tg.passable:
            return 0
        if tg.pos < 0:
            return int(self.score[v])
        idx, arg1, top1, top2 = self.index(yc)
        comp = top2[v] if arg1[v] == tg.pos else top1[v]
        return int(max(comp, idx.query(v, tg.pos), 0))

    def without(self, tg: _Target) -> np.ndarray:
        """Column ``mast(W^u, R_i)`` for all ``u`` when ``R_i`` drops shrunk leaves."""
        if not tg.passable:
            return np.zeros(self.w.n, dtype=np.int64)
        if tg.pos < 0:
            return self.score.copy()
        cols = [self.M[:, k] for j, k in enumerate(self.kids) if j != tg.pos]
        return _virtual_column(self.w, cols)


def rebuild_subproblem_topology(w: AnnotatedTree, j, lift: "_Lift | None" = None):
    """
    Skeleton of the one-shrunk-leaf tree ``W_i`` built from ``W | j``.

    Parameters
    ----------
    w : AnnotatedTree
        Tree whose atomic labels include ``j``.
    j : iterable
        Labels kept as atomic leaves.
    lift : _Lift, optional
        Precomputed ancestor structure of ``w``.

    Returns
    -------
    wi : AnnotatedTree
        Frozen tree with all annotations 0.
    slots : list of tuple
        One entry per annotated node of ``wi``: ``(node, "node", v)`` for a
        skeleton or ``p1`` node standing for ``w``'s node ``v``,
        ``(node, "hang", c, v)`` for the compressed leaf of subtrees hanging
        between ``c`` and ``v``, and ``(node, "gap", v, used)`` for the
        compressed leaf of ``v``'s children outside the child numbers ``used``.
    """
    lift = lift or _Lift(w)
    j = set(j)
    missing = j - set(lift.leaf)
    if missing:
        raise ValueError(f"labels not atomic in w: {sorted(missing, key=repr)[:5]}")
    leaves = [lift.leaf[lab] for lab in j]
    nodes, par = lift.virtual(leaves)
    wi = AnnotatedTree(1)
    made, used, slots = {}, {v: [] for v in nodes}, []
    for v in nodes:
        p = par[v]
        at = made[p] if p >= 0 else -1
        if p >= 0:
            c = lift.anc(v, int(lift.depth[p]) + 1)
            used[p].append(lift.child_no[c])
            top = lift.down[c]
            if top != v and lift.depth[top] < lift.depth[v]:
                p1 = wi.add(at, COMP_INTERNAL, tnode=w.tnode[top])
                z = wi.add(p1, COMP_LEAF, case=2)
                slots.append((p1, "node", top))
                slots.append((z, "hang", c, v))
                at = p1
        if w.kind[v] == ATOMIC:
            made[v] = wi.add(at, ATOMIC, w.label[v], tnode=w.tnode[v])
        else:
            made[v] = wi.add(at, ORDINARY, tnode=w.tnode[v])
            slots.append((made[v], "node", v))
    for v in nodes:
        if w.kind[v] != ATOMIC and lift.nonaux[v] > len(used[v]):
            z = wi.add(made[v], COMP_LEAF, case=1)
            slots.append((z, "gap", v, sorted(used[v])))
    wi.freeze()
    return wi, slots


def _one_form_w(sp: _Spawn, tg: _Target, yc: bool) -> AnnotatedTree:
    w = sp.w
    wi, slots = rebuild_subproblem_topology(w, [lab for lab in tg.labels if lab in sp.lift.leaf],
                                            sp.lift)
    ok = tg.passable
    for slot in slots:
        node, what = slot[0], slot[1]
        if what == "node":
            val = sp.f(slot[2], tg, yc)
        elif not ok:
            val = 0
        elif what == "hang":
            val = max(sp.attach.hanging_query(slot[2], slot[3]), 0)
        else:
            v, val, prev = slot[2], 0, 0
            for k in slot[3] + [len(w.children[v]) + 1]:
                if k - 1 >= prev + 1:
                    val = max(val, sp.attach.interval_query(v, prev + 1, k - 1))
                prev = k
        wi.alpha1[node] = val
    return wi


def _gamma_column(w: AnnotatedTree, slot: int) -> np.ndarray:
    col = (w.alpha1 if slot == 1 else w.alpha2).copy()
    for u in w.postorder():
        for c in w.children[u]:
            if col[c] > col[u]:
                col[u] = col[c]
    return col


def _virtual_column(w: AnnotatedTree, kid_cols: list, yc: dict | None = None) -> np.ndarray:
    """
    ``mast(W^u, Q)`` for every ``u`` where ``Q`` is a fresh root over subtrees
    whose columns are ``kid_cols``.  With ``yc`` the fresh root is the meeting
    node of the two shrunk leaves (keys ``y1``, ``y2`` index ``kid_cols``;
    ``sp1``, ``sp2`` are per-node scores of the off-path subtrees).
    """
    n = w.n
    if not kid_cols:
        return np.zeros(n, dtype=np.int64)
    K = np.stack(kid_cols, axis=1).astype(np.int64)
    m = K.shape[1]
    col = K.max(axis=1)
    other = [] if yc is None else [k for k in range(m) if k not in (yc["y1"], yc["y2"])]
    for u in w.postorder():
        chs = w.children[u]
        best = int(col[u])
        for c in chs:
            if col[c] > best:
                best = int(col[c])
        kind = w.kind[u]
        if len(chs) >= 2 and m >= 2:
            best = max(best, _mwm_value(K[chs]))
        if yc is not None:
            if kind in (COMP_LEAF, COMP_INTERNAL):
                best = max(best, int(w.alphap[u]))
            best = max(best, _virtual_extras(w, u, K, other, yc))
        col[u] = best
    return col


def _virtual_extras(w: AnnotatedTree, u: int, K: np.ndarray, other: list, yc: dict) -> int:
    kind = w.kind[u]
    best = 0
    if kind == ORDINARY:
        zz, zb = _pair_children(w, u)
        if zz >= 0 and zb >= 0 and w.beta[zz] > 0:
            rest = [c for c in w.children[u] if c not in (zz, zb)]
            m = _mwm_value(K[rest][:, other]) if rest and other else 0
            best = int(w.beta[zz]) + m
    elif kind == COMP_INTERNAL:
        zz, _ = _pair_children(w, u)
        pbar = next((c for c in w.children[u] if w.kind[c] == AUX_INTERNAL), -1)
        if zz < 0 or pbar < 0:
            return 0
        wn = next((c for c in w.children[pbar] if w.kind[c] != AUX_LEAF), -1)
        if w.beta[zz] > 0:
            m = int(K[pbar, other].max()) if other else 0
            best = max(best, int(w.beta[zz]) + m)
        if w.beta12[zz] > 0:
            best = max(best, int(w.beta12[zz]) + (int(yc["sp2"][wn]) if wn >= 0 else 0))
        if w.beta21[zz] > 0:
            best = max(best, int(w.beta21[zz]) + (int(yc["sp1"][wn]) if wn >= 0 else 0))
    return best


def _two_form_w(w: AnnotatedTree, labels: set, c1, c2, cp, intra_ok: bool,
                depth) -> AnnotatedTree:
    """Compress ``w`` keeping ``labels`` atomic, with member scores from columns."""
    n = w.n
    ch, kind = w.children, w.kind
    isj = [kind[v] == ATOMIC and w.label[v] in labels for v in range(n)]
    has = [0] * n
    for v in w.postorder():
        c = 1 if isj[v] else 0
        for x in ch[v]:
            if has[x]:
                c += 1
        has[v] = c
    skel = [v == 0 or isj[v] or (bool(ch[v]) and has[v] >= 2) for v in range(n)]
    aux = (AUX_LEAF, AUX_INTERNAL)

    def member(c, pos):
        m = Member(c1[c], c2[c], cp[c], pos)
        if intra_ok and kind[c] == COMP_LEAF:
            m.intra, m.intra12, m.intra21 = int(w.beta[c]), int(w.beta12[c]), int(w.beta21[c])
        return m

    wi = AnnotatedTree(2)
    leafm, vals = {}, []
    stack = [(0, -1, [])]
    while stack:
        yv, wpar, path = stack.pop()
        hanging = [(c, q) for q in path for c in ch[q] if not has[c] and kind[c] not in aux]
        at = wpar
        if hanging:
            top = min((q for _, q in hanging), key=lambda q: depth[q])
            p1 = wi.add(wpar, COMP_INTERNAL, tnode=w.tnode[top])
            z = wi.add(p1, COMP_LEAF, case=2)
            wi.add(p1, AUX_LEAF)
            at = wi.add(p1, AUX_INTERNAL)
            wi.add(at, AUX_LEAF)
            leafm[z] = [member(c, int(depth[q])) for c, q in hanging]
            vals.append((p1, top, True))
        if isj[yv]:
            node = wi.add(at, ATOMIC, w.label[yv], tnode=w.tnode[yv])
        else:
            node = wi.add(at, ORDINARY, tnode=w.tnode[yv])
            vals.append((node, yv, False))
        attached = [c for c in ch[yv] if not has[c] and kind[c] not in aux]
        if attached:
            z = wi.add(node, COMP_LEAF, case=1)
            wi.add(node, AUX_LEAF)
            leafm[z] = [member(c, 0) for c in attached]
        for c in reversed([c for c in ch[yv] if has[c]]):
            sub, d = [], c
            while not skel[d]:
                sub.append(d)
                d = next(x for x in ch[d] if has[x])
            stack.append((d, node, sub))
    wi.freeze()
    for node, v, is_p1 in vals:
        wi.alpha1[node], wi.alpha2[node] = c1[v], c2[v]
        if is_p1:
            wi.alphap[node] = cp[v]
    for z, ms in leafm.items():
        _set_leaf(wi, z, assemble_leaf(2, ms, 2))
    return wi


def aux_zero_shrunk(w: AnnotatedTree, tab, targets: list, stats: RecursionStats | None = None) -> dict:
    """Annotations of every ``W_i`` when ``X`` has no shrunk leaf."""
    sp = _Spawn(w, tab, stats if stats is not None else RecursionStats())
    return {tg.i: _one_form_w(sp, tg, False) for tg in targets}


def aux_one_shrunk(w: AnnotatedTree, tab, targets: list, stats: RecursionStats | None = None) -> dict:
    """Annotations of every ``W_i`` when ``X`` has one shrunk leaf."""
    sp = _Spawn(w, tab, stats if stats is not None else RecursionStats())
    out = {}
    for tg in targets:
        if not tg.olds:
            out[tg.i] = _one_form_w(sp, tg, False)
            continue
        c1 = _gamma_column(w, 1)
        col2 = sp.without(tg)
        cp = _virtual_column(w, [c1, col2])
        out[tg.i] = _two_form_w(w, tg.labels, c1, col2, cp, False, sp.lift.depth)
    return out


def aux_two_shrunk(w: AnnotatedTree, tab, targets: list, stats: RecursionStats | None = None) -> dict:
    """Annotations of every ``W_i`` when ``X`` has two shrunk leaves."""
    sp = _Spawn(w, tab, stats if stats is not None else RecursionStats())
    prep = sp.prep
    meet = prep.yc == sp.root
    out = {}
    for tg in targets:
        if not tg.olds:
            out[tg.i] = _one_form_w(sp, tg, meet)
            continue
        old = next(iter(tg.olds))
        gcol = _gamma_column(w, old)
        rest = sp.without(tg)
        other_in = tg.passable and (prep.g2 if old == 1 else prep.g1) >= 0
        yc = None
        if other_in:
            far, off = _root_path(prep, prep.g2 if old == 1 else prep.g1)
            off += [k for j, k in enumerate(sp.kids) if j != tg.pos and k != far]
            vec = sp.M[:, off].max(axis=1) if off else np.zeros(w.n, dtype=np.int64)
            zero = np.zeros(w.n, dtype=np.int64)
            yc = {"y1": 0, "y2": 1, "sp1": zero if old == 1 else vec, "sp2": vec if old == 1 else zero}
        if old == 1:
            c1, c2 = gcol, rest
        else:
            c1, c2 = rest, gcol
        cp = _virtual_column(w, [c1, c2], yc)
        out[tg.i] = _two_form_w(w, tg.labels, c1, c2, cp, bool(other_in), sp.lift.depth)
    return out


def _root_path(prep, g: int) -> tuple[int, list]:
    """Child of the root towards ``g`` and the off-path children strictly between."""
    path = [g]
    while prep.parent[path[-1]] != prep.root:
        path.append(prep.parent[path[-1]])
    on = set(path)
    off = [c for q in path[1:] for c in prep.children[q] if c not in on]
    return path[-1], off


def _fast_annotations(w, x, y, xy, tab, targets, st):
    shrunk = len(x.shrunk())
    if shrunk == 0:
        got = aux_zero_shrunk(w, tab, targets, st)
    elif shrunk == 1:
        got = aux_one_shrunk(w, tab, targets, st)
    else:
        got = aux_two_shrunk(w, tab, targets, st)
    for wi in got.values():
        st.aux_values += _count_values(wi)
    return got
