"""
Brute-force references.

Nothing here calls the fast agreement or cavity code except where noted
(``naive_mast_unrooted`` and ``naive_mast_mixed`` sweep all rootings with the
rooted dynamic program, which is itself checked against
:func:`brute_mast_rooted`).  Induced shapes are compared through cluster
systems rather than the canonical strings used by :mod:`agreetree.tree`, and
matchings are enumerated rather than solved.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

from .tree import Tree

__all__ = [
    "OracleBudget",
    "BudgetExceeded",
    "DEFAULT_BUDGET",
    "clusters",
    "agree_on",
    "brute_mast_rooted",
    "validate_agreement",
    "naive_mast_unrooted",
    "naive_mast_mixed",
    "rooting_sweep_mast",
    "tiny_mast",
    "enumerate_mwm",
    "naive_all_cavity",
    "alternating_paths",
    "random_rooted_tree",
    "random_unrooted_tree",
    "random_mixed_tree",
    "random_bipartite",
    "relabel_subset",
]


class BudgetExceeded(RuntimeError):
    """An oracle input is above the configured budget."""


@dataclass(frozen=True)
class OracleBudget:
    """Caps on oracle inputs; oracles refuse larger inputs."""

    max_nodes: int = 400
    max_subsets: int = 2_000_000
    max_enum: int = 12


DEFAULT_BUDGET = OracleBudget()


# ---------------------------------------------------------------------------
# Rooted trees by subset enumeration
# ---------------------------------------------------------------------------

def clusters(t: Tree, bit: dict) -> list[int]:
    """Label sets (as bit masks over ``bit``) below every node of rooted ``t``."""
    n = t.n
    if n == 0:
        return []
    par = [-1] * n
    order = [t.root]
    seen = [False] * n
    seen[t.root] = True
    for v in order:
        for w in t.adj[v]:
            if not seen[w]:
                seen[w] = True
                par[w] = v
                order.append(w)
    mask = [0] * n
    for v in reversed(order):
        lab = t.labels[v]
        if lab is not None and lab in bit:
            mask[v] |= 1 << bit[lab]
        if par[v] >= 0:
            mask[par[v]] |= mask[v]
    return mask


def _restricted(cl: list[int], s: int) -> frozenset:
    return frozenset(c & s for c in cl if c & s)


def agree_on(cl1: list[int], cl2: list[int], s: int) -> bool:
    """True if both rooted trees induce the same shape on label mask ``s``."""
    return _restricted(cl1, s) == _restricted(cl2, s)


def brute_mast_rooted(t1: Tree, t2: Tree, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """
    Largest label subset on which two rooted trees induce the same shape.

    Subsets are tried from the largest size down; induced shapes are
    compared as cluster systems, so the search shares nothing with the
    dynamic program.
    """
    shared = sorted(t1.leaf_labels() & t2.leaf_labels(), key=repr)
    k = len(shared)
    if max(t1.n, t2.n) > budget.max_nodes or 2 ** k > budget.max_subsets:
        raise BudgetExceeded(f"{k} shared labels exceed the oracle budget")
    if k <= 2:
        return k
    bit = {lab: i for i, lab in enumerate(shared)}
    c1, c2 = clusters(t1, bit), clusters(t2, bit)
    for size in range(k, 2, -1):
        for comb in combinations(range(k), size):
            s = 0
            for i in comb:
                s |= 1 << i
            if agree_on(c1, c2, s):
                return size
    return 2


def validate_agreement(witness: Tree, t1: Tree, t2: Tree) -> bool:
    """
    Check that ``witness`` is an agreement subtree of rooted ``t1`` and ``t2``.

    The witness must be a rooted tree whose leaf labels appear in both trees
    and whose cluster system equals the one each input induces on them.
    """
    labs = witness.leaf_labels()
    if witness.n == 0:
        return True
    if not labs <= (t1.leaf_labels() & t2.leaf_labels()):
        return False
    if any(witness.labels[v] is not None and len(witness.adj[v]) > 1 and v != witness.root
           for v in range(witness.n)):
        return False
    bit = {lab: i for i, lab in enumerate(sorted(labs, key=repr))}
    s = (1 << len(bit)) - 1
    cw = _restricted(clusters(witness, bit), s)
    return cw == _restricted(clusters(t1, bit), s) == _restricted(clusters(t2, bit), s)


# ---------------------------------------------------------------------------
# Unrooted and mixed trees: sweep over rootings
# ---------------------------------------------------------------------------

def _consistent_rooting(t: Tree, u: int) -> Tree:
    """Rooted copy of ``t`` at ``u`` keeping the nodes consistent with ``u``."""
    keep = [u]
    seen = {u}
    for v in keep:
        for w in t.adj[v]:
            if w not in seen and (w, v) not in t.arcs:
                seen.add(w)
                keep.append(w)
    index = {v: i for i, v in enumerate(keep)}
    parent = [-1] * len(keep)
    for v in keep:
        for w in t.adj[v]:
            if w in index and index[w] > index[v] and parent[index[w]] == -1 and w != u:
                parent[index[w]] = index[v]
    return Tree.from_parents(parent, [t.labels[v] for v in keep])


def _co_consistent(t: Tree, labs) -> bool:
    """Some root candidate of ``t`` has every label of ``labs`` consistent with it."""
    want = set(labs)
    cand = t.internal_nodes() if t.n >= 3 else range(t.n)
    for u in cand:
        seen = {u}
        stack = [u]
        got = set()
        while stack:
            v = stack.pop()
            if t.labels[v] in want:
                got.add(t.labels[v])
            for w in t.adj[v]:
                if w not in seen and (w, v) not in t.arcs:
                    seen.add(w)
                    stack.append(w)
        if got == want:
            return True
    return False


def tiny_mast(u1: Tree, u2: Tree) -> int:
    """
    Base rule when a tree has fewer than three nodes: the largest set of at
    most two shared labels that is consistent with some node of each tree.
    """
    shared = sorted(u1.leaf_labels() & u2.leaf_labels(), key=repr)
    for size in (2, 1):
        for comb in combinations(shared, size):
            if _co_consistent(u1, comb) and _co_consistent(u2, comb):
                return size
    return 0


def naive_mast_unrooted(u1: Tree, u2: Tree, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """
    Maximum of the rooted agreement value over all internal root pairs.

    Every consistent rooting is a choice of root plus, for each other node,
    the subtree seen through one directed edge.  Agreement values of pairs of
    such edge subtrees are memoised, so all root pairs share the work.
    """
    if max(u1.n, u2.n) > budget.max_nodes:
        raise BudgetExceeded("tree too large for the all-rootings sweep")
    if u1.n < 3 or u2.n < 3:
        return tiny_mast(u1, u2)
    from scipy.optimize import linear_sum_assignment

    def kids(t, p, v):
        return [(v, w) for w in t.adj[v] if w != p and (w, v) not in t.arcs]

    memo: dict = {}

    def f(a, b):
        key = (a, b)
        hit = memo.get(key)
        if hit is not None:
            return hit
        ka = kids(u1, *a)
        kb = kids(u2, *b)
        if not ka and not kb:
            lab = u1.labels[a[1]]
            val = int(lab is not None and lab == u2.labels[b[1]])
        else:
            val = 0
            for c in ka:
                val = max(val, f(c, b))
            for d in kb:
                val = max(val, f(a, d))
            if ka and kb:
                mat = np.array([[f(c, d) for d in kb] for c in ka], dtype=np.int64)
                r, c = linear_sum_assignment(mat, maximize=True)
                val = max(val, int(mat[r, c].sum()))
        memo[key] = val
        return val

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * (u1.n + u2.n) + 100))
    try:
        return max(f((-1, u), (-1, v)) for u in u1.internal_nodes() for v in u2.internal_nodes())
    finally:
        sys.setrecursionlimit(limit)


def rooting_sweep_mast(u1: Tree, u2: Tree, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """Literal sweep: one rooted dynamic program per internal root pair."""
    from .rooted import mast_rooted

    if max(u1.n, u2.n) > budget.max_nodes:
        raise BudgetExceeded("tree too large for the all-rootings sweep")
    if u1.n < 3 or u2.n < 3:
        return tiny_mast(u1, u2)
    best = 0
    roots2 = [_consistent_rooting(u2, v) for v in u2.internal_nodes()]
    for u in u1.internal_nodes():
        r1 = _consistent_rooting(u1, u)
        for r2 in roots2:
            best = max(best, mast_rooted(r1, r2))
    return best


def naive_mast_mixed(m1: Tree, m2: Tree, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """All-rootings sweep for mixed trees (consistent rootings at internal nodes)."""
    return naive_mast_unrooted(m1, m2, budget)


# ---------------------------------------------------------------------------
# Matchings by enumeration
# ---------------------------------------------------------------------------

def _weight_matrix(g) -> np.ndarray:
    mat = np.zeros((g.nx, g.ny), dtype=np.int64)
    for x, y, w in g.edges():
        mat[x, y] = w
    return mat


def enumerate_mwm(mat: np.ndarray, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """Maximum matching weight by trying every injection of the smaller side."""
    mat = np.asarray(mat)
    if mat.size == 0:
        return 0
    if mat.shape[0] > mat.shape[1]:
        mat = mat.T
    nx, ny = mat.shape
    if nx > budget.max_enum or ny > budget.max_enum:
        raise BudgetExceeded("matching enumeration above budget")
    best = 0
    for cols in permutations(range(ny), nx):
        s = 0
        for i, j in enumerate(cols):
            s += mat[i, j]
        if s > best:
            best = s
    return int(best)


def naive_all_cavity(g, method: str = "scipy", enumerate_small: bool = True,
                     budget: OracleBudget = DEFAULT_BUDGET):
    """
    Deletion values by recomputing a matching for every node separately.

    Returns ``(mwm, values_x, values_y)``.  With ``enumerate_small`` and both
    sides of at most ``budget.max_enum`` nodes the values come from full
    enumeration instead of the matching solver.
    """
    if g.nx + g.ny > budget.max_nodes * 10:
        raise BudgetExceeded("graph above oracle budget")
    mat = _weight_matrix(g)
    small = enumerate_small and max(g.nx, g.ny) <= budget.max_enum and min(g.nx, g.ny) <= 7
    if small:
        solve = enumerate_mwm
    else:
        from scipy.optimize import linear_sum_assignment

        def solve(m):
            if m.size == 0:
                return 0
            r, c = linear_sum_assignment(m, maximize=True)
            return int(m[r, c].sum())
    total = solve(mat)
    vx = [solve(np.delete(mat, i, axis=0)) for i in range(g.nx)]
    vy = [solve(np.delete(mat, j, axis=1)) for j in range(g.ny)]
    return total, vx, vy


def alternating_paths(mat: np.ndarray, mate_x: Sequence[int], mate_y: Sequence[int],
                      start: tuple, max_len: int = 20):
    """
    Best net gain of alternating paths starting at a matched node.

    ``start`` is ``("x", i)`` or ``("y", j)``; the path begins with the matched
    edge of that node and alternates.  Returns a dict mapping every end node
    ``(side, index)`` to the best gain (weight of unmatched edges minus
    weight of matched edges along the path).  Paths may end after a matched
    edge or after an unmatched edge whose far end is free.
    """
    best: dict = {}
    nx, ny = mat.shape

    def rec(side, node, gain, used_x, used_y, depth):
        # currently at `node` on `side`, just arrived via a matched edge
        key = (side, node)
        if gain > best.get(key, -10 ** 18):
            best[key] = gain
        if depth >= max_len:
            return
        if side == "x":
            for j in range(ny):
                if mat[node, j] > 0 and j not in used_y and mate_x[node] != j:
                    g2 = gain + mat[node, j]
                    mj = mate_y[j]
                    if mj < 0:
                        k = ("y", j)
                        if g2 > best.get(k, -10 ** 18):
                            best[k] = g2
                    elif mj not in used_x:
                        rec("x", mj, g2 - mat[mj, j], used_x | {mj}, used_y | {j}, depth + 1)
        else:
            for i in range(nx):
                if mat[i, node] > 0 and i not in used_x and mate_y[node] != i:
                    g2 = gain + mat[i, node]
                    mi = mate_x[i]
                    if mi < 0:
                        k = ("x", i)
                        if g2 > best.get(k, -10 ** 18):
                            best[k] = g2
                    elif mi not in used_y:
                        rec("y", mi, g2 - mat[i, mi], used_x | {i}, used_y | {mi}, depth + 1)

    side, u = start
    if side == "x":
        j = mate_x[u]
        if j < 0:
            return best
        rec("y", j, -int(mat[u, j]), {u}, {j}, 0)
    else:
        i = mate_y[u]
        if i < 0:
            return best
        rec("x", i, -int(mat[i, u]), {i}, {u}, 0)
    return best


# ---------------------------------------------------------------------------
# Seeded generators
# ---------------------------------------------------------------------------

def random_rooted_tree(rng: np.random.Generator, labels: Sequence, max_degree: int | None = 2,
                       unary: float = 0.0) -> Tree:
    """
    Random rooted tree on ``labels`` by recursive attachment.

    With ``max_degree=2`` the result is binary; ``None`` allows any degree.
    ``unary`` is the probability of subdividing each edge with a unary node.
    """
    labels = list(labels)
    if not labels:
        return Tree.empty()
    order = list(rng.permutation(len(labels)))
    parent = [-1]
    lab = [labels[order[0]]]
    for idx in order[1:]:
        # choose a node to attach to: a leaf is split, an internal node gains a child
        n = len(parent)
        while True:
            v = int(rng.integers(n))
            kids = sum(1 for p in parent if p == v)
            if lab[v] is not None:
                break
            if max_degree is None or kids < max_degree:
                break
        if lab[v] is not None:
            # split: v becomes internal, old label moves to a new child
            parent.append(v)
            lab.append(lab[v])
            lab[v] = None
        parent.append(v)
        lab.append(labels[idx])
    if unary > 0:
        parent, lab = _subdivide(rng, parent, lab, unary)
    return Tree.from_parents(parent, lab)


def _subdivide(rng, parent, lab, p):
    parent = list(parent)
    lab = list(lab)
    for v in range(len(parent)):
        if parent[v] >= 0 and rng.random() < p:
            mid = len(parent)
            parent.append(parent[v])
            lab.append(None)
            parent[v] = mid
    return parent, lab


def random_unrooted_tree(rng: np.random.Generator, labels: Sequence, max_degree: int | None = 3) -> Tree:
    """Random unrooted tree (internal degrees at least 3 when possible)."""
    labels = list(labels)
    if len(labels) <= 2:
        adj = [[] for _ in labels]
        if len(labels) == 2:
            adj = [[1], [0]]
        return Tree(adj, labels)
    sub = None if max_degree is None else max_degree - 1
    t = random_rooted_tree(rng, labels, sub)
    # unroot: suppress a degree-2 root
    parent, lab = list(t.parent), list(t.labels)
    r = t.root
    kids = [v for v in range(t.n) if parent[v] == r]
    adj = [list(a) for a in t.adj]
    if len(kids) == 2:
        a, b = kids
        adj[a] = [b if w == r else w for w in adj[a]]
        adj[b] = [a if w == r else w for w in adj[b]]
        keep = [v for v in range(t.n) if v != r]
        index = {v: i for i, v in enumerate(keep)}
        adj = [[index[w] for w in adj[v]] for v in keep]
        lab = [lab[v] for v in keep]
    return Tree(adj, lab)


def random_mixed_tree(rng: np.random.Generator, labels: Sequence, arc_prob: float = 0.3,
                      max_degree: int | None = 3) -> Tree:
    """Random unrooted tree whose edges are directed with probability ``arc_prob``."""
    t = random_unrooted_tree(rng, labels, max_degree)
    arcs = []
    for a, b in t.edges():
        if rng.random() < arc_prob:
            arcs.append((a, b) if rng.random() < 0.5 else (b, a))
    return Tree(t.adj, t.labels, arcs=arcs)


def random_bipartite(rng: np.random.Generator, nx: int, ny: int, p: float, wmax: int):
    """Erdos-Renyi bipartite graph with integer weights in ``[1, wmax]``."""
    from .matching import WeightedBipartiteGraph

    mask = rng.random((nx, ny)) < p
    xs, ys = np.nonzero(mask)
    ws = rng.integers(1, wmax + 1, size=len(xs))
    return WeightedBipartiteGraph(nx, ny, list(zip(xs.tolist(), ys.tolist(), ws.tolist())))


def relabel_subset(rng: np.random.Generator, labels: Sequence, keep: float) -> list:
    """Random subset of ``labels`` (each kept with probability ``keep``)."""
    return [lab for lab in labels if rng.random() < keep]
