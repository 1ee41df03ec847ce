"""
Rooted maximum agreement subtrees.

The dynamic program fills ``R[u, v] = mast(W1^u, W2^v)`` one batch of
``W1`` nodes at a time (all nodes of equal height together), each batch as a
block of rows over every ``W2`` column:

    P[u, v] = max(max_c R[c, v], rootterm(u, v))
    R[u, v] = max{P[u, v'] : v' in W2^v}

``rootterm`` is the leaf rule (label match, compressed-leaf scores) or, for
internal pairs, the maximum-weight matching between children weighted by
``R``.  The subtree maximum over ``W2`` is a doubling table over preorder.

``W1`` may be a compressed tree (:class:`~agreetree.compression.AnnotatedTree`)
and ``W2`` a shrunk tree, in which case compressed nodes of ``W1`` may take
the shrunk leaves of ``W2`` (and their meeting node) as partners.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .compression import (
    ATOMIC,
    AUX_INTERNAL,
    AUX_LEAF,
    COMP_INTERNAL,
    COMP_LEAF,
    ORDINARY,
    AnnotatedTree,
    ShrunkTree,
    plain_annotated,
)
from .tree import Tree

__all__ = [
    "MastStats",
    "MastTable",
    "PreparedShrunk",
    "mast_rooted",
    "rooted_witness",
    "mast_annotated",
    "mast_table",
    "r_mast_internal",
    "extract_agreement_subtree",
    "subtree_scores",
]


@dataclass
class MastStats:
    """Work counters of the rooted dynamic program."""

    calls: int = 0
    node_pairs: int = 0
    matchings: int = 0
    extra: dict = field(default_factory=dict)

    def add(self, other: "MastStats"):
        self.calls += other.calls
        self.node_pairs += other.node_pairs
        self.matchings += other.matchings


GLOBAL_STATS = MastStats()


class PreparedShrunk:
    """Column-side bookkeeping for a rooted (possibly shrunk) tree."""

    def __init__(self, x):
        if isinstance(x, Tree):
            x = ShrunkTree(x, [0] * x.n)
        t = x.tree
        if t.n and t.root is None:
            raise ValueError("the second tree must be rooted")
        self.x = x
        self.n = n = t.n
        if n == 0:
            return
        parent, children, order = t._rooted_arrays()
        self.parent = parent
        self.children = children
        self.root = t.root
        self.perm = np.asarray(order, dtype=np.int64)
        pos = np.empty(n, dtype=np.int64)
        pos[self.perm] = np.arange(n)
        desc = np.zeros(n, dtype=np.int64)
        for v in reversed(order):
            if parent[v] >= 0:
                desc[parent[v]] += desc[v] + 1
        self.pos = pos
        self.desc = desc
        lens = desc + 1
        ks = np.floor(np.log2(lens)).astype(np.int64)
        self.qgroups = []
        for k in np.unique(ks):
            cols = np.nonzero(ks == k)[0]
            lo = pos[cols]
            hi = pos[cols] + desc[cols] - (1 << int(k)) + 1
            self.qgroups.append((int(k), cols, lo, hi))
        self.max_level = int(ks.max())
        # internal nodes grouped by parent
        self.internal = np.asarray([v for v in order if children[v]], dtype=np.int64)
        cl, ptr, rep = [], [], []
        for g, v in enumerate(self.internal):
            ptr.append(len(cl))
            cl.extend(children[v])
            rep.extend([g] * len(children[v]))
        self.cl = np.asarray(cl, dtype=np.int64)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.rep = np.asarray(rep, dtype=np.int64)
        deg = np.asarray([len(children[v]) for v in self.internal], dtype=np.int64)
        two = deg == 2
        self.d2_nodes = self.internal[two]
        self.d2_a = np.asarray([children[v][0] for v in self.d2_nodes], dtype=np.int64)
        self.d2_b = np.asarray([children[v][1] for v in self.d2_nodes], dtype=np.int64)
        self.big_nodes = [int(v) for v in self.internal[deg >= 3]]
        self.label_col = {lab: v for v, lab in enumerate(t.labels) if lab is not None}
        sh = x.shrunk()
        self.g1 = sh.get(1, -1)
        self.g2 = sh.get(2, -1)
        self.yc = x.meet()
        self.y1 = self.y2 = -1
        self.sp1: list[int] = []
        self.sp2: list[int] = []
        self.yc_other: list[int] = []
        if self.yc >= 0:
            self.y1, self.sp1 = self._path_info(self.g1)
            self.y2, self.sp2 = self._path_info(self.g2)
            self.yc_other = [c for c in children[self.yc] if c not in (self.y1, self.y2)]

    def _path_info(self, g):
        """Child of ``yc`` towards ``g`` and the off-path children strictly between."""
        path = []
        v = g
        while v != self.yc:
            path.append(v)
            v = self.parent[v]
        top = path[-1]
        on = set(path)
        off = []
        for q in path[1:]:  # nodes strictly between yc and g
            off.extend(c for c in self.children[q] if c not in on)
        return top, off

    def subtree_max(self, P: np.ndarray) -> np.ndarray:
        Q = P[:, self.perm]
        levels = [Q]
        span = 1
        for _ in range(self.max_level):
            prev = levels[-1]
            levels.append(np.maximum(prev[:, :-span], prev[:, span:]))
            span *= 2
        out = np.empty_like(P)
        for k, cols, lo, hi in self.qgroups:
            lvl = levels[k]
            out[:, cols] = np.maximum(lvl[:, lo], lvl[:, hi])
        return out


def _pair_max_grouped(va: np.ndarray, vb: np.ndarray, ptr, rep) -> np.ndarray:
    """``max_{d != d'} va[d] + vb[d']`` within column groups, row by row."""
    t1 = np.maximum.reduceat(vb, ptr, axis=1)
    t1e = t1[:, rep]
    top = vb == t1e
    cnt = np.add.reduceat(top.astype(np.int32), ptr, axis=1)
    t2 = np.maximum.reduceat(np.where(top, -1, vb), ptr, axis=1)
    second = np.where(cnt >= 2, t1, t2)
    other = np.where(top, second[:, rep], t1e)
    return np.maximum.reduceat(va + other, ptr, axis=1)


def _pair_max_rows(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """``max_{c != c'} x1[c] + x2[c']`` column by column (rows are the c's)."""
    t1 = x2.max(axis=0)
    top = x2 == t1
    cnt = top.sum(axis=0)
    t2 = np.where(top, -1, x2).max(axis=0)
    second = np.where(cnt >= 2, t1, t2)
    other = np.where(top, second, t1)
    return (x1 + other).max(axis=0)


def _mwm_value(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    if mat.shape[0] == 1 or mat.shape[1] == 1:
        return int(max(mat.max(), 0))
    r, c = linear_sum_assignment(mat, maximize=True)
    return int(mat[r, c].sum())


class MastTable:
    """
    Result of the rooted dynamic program.

    ``table[u, v]`` is ``mast(W1^u, W2^v)``; ``value`` is the entry for the
    two roots.
    """

    def __init__(self, w1: AnnotatedTree, prep: PreparedShrunk, table: np.ndarray, stats: MastStats):
        self.w1 = w1
        self.prep = prep
        self.table = table
        self.stats = stats

    @property
    def value(self) -> int:
        if self.w1.n == 0 or self.prep.n == 0:
            return 0
        return int(self.table[0, self.prep.root])

    def column(self, v: int) -> np.ndarray:
        return self.table[:, v]


def _pair_children(w1: AnnotatedTree, u: int):
    zz = zb = -1
    for c in w1.children[u]:
        if w1.kind[c] == COMP_LEAF:
            zz = c
        elif w1.kind[c] == AUX_LEAF:
            zb = c
    return zz, zb


def mast_table(w1, w2, stats: MastStats | None = None) -> MastTable:
    """
    Fill the full table ``mast(W1^u, W2^v)``.

    Parameters
    ----------
    w1 : AnnotatedTree or Tree
        Row tree (a plain rooted tree is wrapped automatically).
    w2 : ShrunkTree, PreparedShrunk or Tree
        Rooted column tree.
    """
    if isinstance(w1, Tree):
        w1 = plain_annotated(w1)
    prep = w2 if isinstance(w2, PreparedShrunk) else PreparedShrunk(w2)
    st = MastStats(calls=1)
    n1, n2 = w1.n, prep.n
    table = np.zeros((n1, n2), dtype=np.int32)
    if n1 == 0 or n2 == 0:
        _merge(stats, st)
        return MastTable(w1, prep, table, st)
    st.node_pairs = n1 * n2
    kind = w1.kind
    children = w1.children
    two_form = w1.form == 2 and prep.yc >= 0
    # heights
    height = [0] * n1
    for u in w1.postorder():
        if children[u]:
            height[u] = 1 + max(height[c] for c in children[u])
    groups: dict[int, list[int]] = {}
    for u in range(n1):
        groups.setdefault(height[u], []).append(u)
    g1, g2, yc = prep.g1, prep.g2, prep.yc
    a1, a2, ap = w1.alpha1, w1.alpha2, w1.alphap
    for h in sorted(groups):
        U = np.asarray(groups[h], dtype=np.int64)
        if h == 0:
            P = np.zeros((len(U), n2), dtype=np.int32)
            for r, u in enumerate(U):
                k = kind[u]
                if k == ATOMIC:
                    col = prep.label_col.get(w1.label[u])
                    if col is not None:
                        P[r, col] = 1
                elif k == COMP_LEAF:
                    if g1 >= 0:
                        P[r, g1] = a1[u]
                    if g2 >= 0:
                        P[r, g2] = a2[u]
                    if yc >= 0:
                        P[r, yc] = max(P[r, yc], ap[u])
            table[U] = prep.subtree_max(P)
            continue
        flat, ptr = [], []
        for u in U:
            ptr.append(len(flat))
            flat.extend(children[u])
        P = np.maximum.reduceat(table[flat], np.asarray(ptr), axis=0)
        if g1 >= 0:
            P[:, g1] = np.maximum(P[:, g1], a1[U])
        if g2 >= 0:
            P[:, g2] = np.maximum(P[:, g2], a2[U])
        if yc >= 0:
            P[:, yc] = np.maximum(P[:, yc], np.where(np.asarray([kind[u] for u in U]) == COMP_INTERNAL, ap[U], 0))
        nint = len(prep.internal)
        if nint:
            binary = [r for r, u in enumerate(U) if len(children[u]) == 2]
            if binary:
                rows = np.asarray(binary)
                c1 = [children[U[r]][0] for r in binary]
                c2 = [children[U[r]][1] for r in binary]
                va = table[c1][:, prep.cl]
                vb = table[c2][:, prep.cl]
                pair = _pair_max_grouped(va, vb, prep.ptr, prep.rep)
                sub = P[rows][:, prep.internal]
                P[np.ix_(rows, prep.internal)] = np.maximum(sub, pair)
            for r, u in enumerate(U):
                if len(children[u]) >= 3:
                    _rmast_wide(table, children[u], prep, P, r, st)
        if two_form:
            for r, u in enumerate(U):
                extra = _yc_extras(w1, u, table, prep)
                if extra > P[r, yc]:
                    P[r, yc] = extra
        table[U] = prep.subtree_max(P)
    _merge(stats, st)
    return MastTable(w1, prep, table, st)


def _merge(stats, st):
    GLOBAL_STATS.add(st)
    if stats is not None:
        stats.add(st)


def _rmast_wide(table, kids, prep, P, r, st):
    K = table[kids]
    K = K[K.any(axis=1)]
    k = K.shape[0]
    if k < 2:
        return
    if k == 2:
        pair = _pair_max_grouped(K[0:1][:, prep.cl], K[1:2][:, prep.cl], prep.ptr, prep.rep)[0]
        P[r, prep.internal] = np.maximum(P[r, prep.internal], pair)
        return
    if len(prep.d2_nodes):
        pair = _pair_max_rows(K[:, prep.d2_a], K[:, prep.d2_b])
        P[r, prep.d2_nodes] = np.maximum(P[r, prep.d2_nodes], pair)
    for v in prep.big_nodes:
        sub = K[:, prep.children[v]]
        st.matchings += 1
        val = _mwm_value(sub)
        if val > P[r, v]:
            P[r, v] = val
    # columns of one-child nodes never beat a single child pair


def _yc_extras(w1: AnnotatedTree, u: int, table, prep: PreparedShrunk) -> int:
    """Root terms at the meeting node that involve a ``beta`` value."""
    kind = w1.kind[u]
    best = 0
    if kind == ORDINARY:
        zz, zb = _pair_children(w1, u)
        if zz >= 0 and zb >= 0 and w1.beta[zz] > 0:
            rest = [c for c in w1.children[u] if c not in (zz, zb)]
            m = _mwm_value(table[rest][:, prep.yc_other]) if rest and prep.yc_other else 0
            best = int(w1.beta[zz]) + m
    elif kind == COMP_INTERNAL:
        zz, _ = _pair_children(w1, u)
        pbar = next((c for c in w1.children[u] if w1.kind[c] == AUX_INTERNAL), -1)
        if zz < 0 or pbar < 0:
            return 0
        w = next((c for c in w1.children[pbar] if w1.kind[c] != AUX_LEAF), -1)
        if w1.beta[zz] > 0:
            m = int(table[pbar, prep.yc_other].max()) if prep.yc_other else 0
            best = max(best, int(w1.beta[zz]) + m)
        if w1.beta12[zz] > 0:
            m = int(table[w, prep.sp2].max()) if (w >= 0 and prep.sp2) else 0
            best = max(best, int(w1.beta12[zz]) + m)
        if w1.beta21[zz] > 0:
            m = int(table[w, prep.sp1].max()) if (w >= 0 and prep.sp1) else 0
            best = max(best, int(w1.beta21[zz]) + m)
    return best


def mast_annotated(w1: AnnotatedTree, w2, stats: MastStats | None = None) -> int:
    """Agreement value of a compressed tree against a rooted shrunk tree."""
    return mast_table(w1, w2, stats).value


def mast_rooted(t1: Tree, t2: Tree, stats: MastStats | None = None) -> int:
    """Size of a maximum agreement subtree of two rooted trees."""
    if t1.n == 0 or t2.n == 0:
        return 0
    return mast_table(plain_annotated(t1), t2, stats).value


def rooted_witness(t1: Tree, t2: Tree, stats: MastStats | None = None) -> tuple[int, Tree]:
    """MAST size of two rooted trees together with one agreement subtree."""
    if t1.n == 0 or t2.n == 0:
        return 0, Tree.empty()
    tab = mast_table(plain_annotated(t1), t2, stats)
    return tab.value, extract_agreement_subtree(tab)


def subtree_scores(t: Tree, r, stats: MastStats | None = None) -> np.ndarray:
    """``mast(t^v, r)`` for every node ``v`` of rooted ``t``, indexed by ``t``'s ids."""
    out = np.zeros(t.n, dtype=np.int64)
    if t.n == 0 or r is None or r.n == 0:
        return out
    w = plain_annotated(t)
    tab = mast_table(w, r, stats)
    out[np.asarray(w.tnode)] = tab.table[:, tab.prep.root]
    return out


def r_mast_internal(tab: MastTable, u: int, v: int) -> int:
    """
    Agreement value restricted to mappings that send ``u`` to ``v``.

    For two internal nodes this is the matching value over child pairs; for
    a leaf pair it is the leaf rule.
    """
    w1, prep = tab.w1, tab.prep
    kids1 = w1.children[u]
    kids2 = prep.children[v]
    if not kids1 or not kids2:
        if not kids1 and not kids2 and w1.kind[u] == ATOMIC:
            return int(prep.x.tree.labels[v] == w1.label[u])
        return 0
    return _mwm_value(tab.table[kids1][:, kids2].astype(np.int64))


def extract_agreement_subtree(tab: MastTable) -> Tree:
    """
    Rebuild one maximum agreement subtree from a filled table of plain trees.

    Returns a rooted :class:`Tree` whose leaf labels form the agreement set.
    """
    w1, prep = tab.w1, tab.prep
    if w1.form != 0:
        raise ValueError("witness extraction needs plain trees")
    R = tab.table
    labels2 = prep.x.tree.labels
    parent: list[int] = []
    labels: list = []
    if tab.value == 0:
        return Tree.empty()

    def new(p, lab=None):
        parent.append(p)
        labels.append(lab)
        return len(parent) - 1

    stack = [(0, prep.root, -1)]
    while stack:
        u, v, p = stack.pop()
        val = R[u, v]
        moved = True
        while moved:
            moved = False
            for c in w1.children[u]:
                if R[c, v] == val:
                    u, moved = c, True
                    break
            else:
                for d in prep.children[v]:
                    if R[u, d] == val:
                        v, moved = d, True
                        break
        if not w1.children[u]:
            if prep.children[v] or labels2[v] != w1.label[u]:
                raise AssertionError("inconsistent table during extraction")
            new(p, w1.label[u])
            continue
        kids1, kids2 = w1.children[u], prep.children[v]
        sub = R[kids1][:, kids2].astype(np.int64)
        rows, cols = linear_sum_assignment(sub, maximize=True)
        node = new(p)
        for a, b in zip(rows, cols):
            if sub[a, b] > 0:
                stack.append((kids1[a], kids2[b], node))
    return Tree.from_parents(parent, labels)
