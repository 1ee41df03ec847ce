"""
Evolutionary trees: representation, Newick I/O and structural primitives.

A :class:`Tree` is an adjacency structure over dense integer node ids.  The
same class covers the three flavours used throughout the package:

* unrooted trees (``root is None`` and no directed edges),
* rooted trees (``root`` set; parent/children derived from it),
* mixed trees (``root is None`` with some edges directed, stored in ``arcs``
  as ``(a, b)`` meaning the edge points from ``a`` to ``b``).

Only leaves carry labels.  A node of degree 0 or 1 is a leaf; in a rooted
tree this makes a root with a single child a leaf as well.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence

__all__ = [
    "Tree",
    "NewickError",
    "parse_newick",
    "serialize_newick",
    "root_at",
    "subtree_at",
    "induced_subtree",
    "restrict_labels",
    "find_separator",
    "components_without",
    "insert_dummy_nodes",
    "PreorderIndex",
    "preorder_index",
    "isomorphic",
]


class NewickError(ValueError):
    """Malformed Newick text, with the offending character position."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class Tree:
    """
    An evolutionary tree with distinctly labeled leaves.

    Parameters
    ----------
    adj : list of lists
        ``adj[v]`` lists the neighbours of node ``v``.
    labels : list
        ``labels[v]`` is the leaf label of ``v`` or ``None``.
    root : int, optional
        Root node for the rooted form.
    arcs : iterable of (a, b), optional
        Directed edges of a mixed tree, each pointing from ``a`` to ``b``.
    dummy : iterable of int, optional
        Nodes inserted by :func:`insert_dummy_nodes`.
    orig : list of int, optional
        Node id in the tree this one was derived from (``-1`` if new).
    """

    __slots__ = ("adj", "labels", "root", "arcs", "dummy", "orig", "_rooted", "_leaf_of")

    def __init__(self, adj, labels, root=None, arcs=(), dummy=(), orig=None):
        self.adj = adj
        self.labels = labels
        self.root = root
        self.arcs = frozenset(arcs)
        self.dummy = frozenset(dummy)
        self.orig = orig
        self._rooted = None
        self._leaf_of = None
        if self.arcs and root is not None:
            raise ValueError("directed edges are only allowed in unrooted (mixed) trees")
        seen = set()
        for v, lab in enumerate(labels):
            if lab is None:
                continue
            if lab in seen:
                raise ValueError(f"duplicate leaf label {lab!r}")
            seen.add(lab)

    # -- basic properties -------------------------------------------------
    def __len__(self):
        return len(self.adj)

    def __repr__(self):
        kind = "rooted" if self.root is not None else ("mixed" if self.arcs else "unrooted")
        return f"<Tree {kind} nodes={len(self)} leaves={len(self.leaf_labels())}>"

    @property
    def n(self) -> int:
        return len(self.adj)

    @property
    def is_rooted(self) -> bool:
        return self.root is not None

    @property
    def is_mixed(self) -> bool:
        return bool(self.arcs)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def is_leaf(self, v: int) -> bool:
        return len(self.adj[v]) <= 1

    def leaves(self) -> list[int]:
        return [v for v in range(self.n) if len(self.adj[v]) <= 1]

    def internal_nodes(self) -> list[int]:
        return [v for v in range(self.n) if len(self.adj[v]) > 1]

    def leaf_labels(self) -> set:
        return {lab for lab in self.labels if lab is not None}

    def leaf_of(self, label) -> int:
        if self._leaf_of is None:
            self._leaf_of = {lab: v for v, lab in enumerate(self.labels) if lab is not None}
        return self._leaf_of[label]

    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.n) for b in self.adj[a] if a < b]

    def passable(self, a: int, b: int) -> bool:
        """True unless the edge between ``a`` and ``b`` is directed towards ``a``."""
        return (b, a) not in self.arcs

    # -- rooted helpers ---------------------------------------------------
    def _rooted_arrays(self):
        if self._rooted is None:
            if self.root is None:
                raise ValueError("tree is not rooted")
            n = self.n
            parent = [-1] * n
            children = [[] for _ in range(n)]
            order = []
            stack = [self.root]
            parent[self.root] = -1
            while stack:
                v = stack.pop()
                order.append(v)
                kids = [w for w in self.adj[v] if w != parent[v]]
                children[v] = kids
                for w in kids:
                    parent[w] = v
                stack.extend(reversed(kids))
            self._rooted = (parent, children, order)
        return self._rooted

    @property
    def parent(self) -> list[int]:
        return self._rooted_arrays()[0]

    @property
    def children(self) -> list[list[int]]:
        return self._rooted_arrays()[1]

    @property
    def preorder(self) -> list[int]:
        return self._rooted_arrays()[2]

    def postorder(self) -> list[int]:
        return self._rooted_arrays()[2][::-1]

    def subtree_labels(self) -> list[frozenset]:
        """Label set below every node of a rooted tree."""
        _, children, order = self._rooted_arrays()
        out = [frozenset()] * self.n
        for v in reversed(order):
            if self.labels[v] is not None:
                out[v] = frozenset((self.labels[v],))
            else:
                acc = set()
                for w in children[v]:
                    acc |= out[w]
                out[v] = frozenset(acc)
        return out

    @classmethod
    def from_parents(cls, parent: Sequence[int], labels, **kw) -> "Tree":
        """Build a rooted tree from a parent array (root has parent -1)."""
        n = len(parent)
        adj = [[] for _ in range(n)]
        root = None
        for v, p in enumerate(parent):
            if p < 0:
                root = v
            else:
                adj[p].append(v)
                adj[v].append(p)
        # keep children ahead of the parent edge for stable child order
        for v in range(n):
            p = parent[v]
            if p >= 0:
                adj[v].remove(p)
                adj[v].insert(0, p)
        return cls(adj, list(labels), root=root, **kw)

    @classmethod
    def empty(cls) -> "Tree":
        return cls([], [], root=None)


# ---------------------------------------------------------------------------
# Newick
# ---------------------------------------------------------------------------

_SPECIAL = set("(),;:<>'[]")


def parse_newick(text: str, rooted: bool = False) -> Tree:
    """
    Parse a Newick expression.

    The outermost group becomes an ordinary node; with ``rooted=True`` it is
    also the root.  A child group may be prefixed by ``>`` (edge directed away
    from the parent) or ``<`` (towards the parent) to describe mixed trees.
    Internal node names and branch lengths are accepted and discarded.
    """
    pos = 0
    n_text = len(text)
    adj: list[list[int]] = []
    labels: list = []
    arcs: list[tuple[int, int]] = []

    def skip_ws():
        nonlocal pos
        while pos < n_text:
            ch = text[pos]
            if ch.isspace():
                pos += 1
            elif ch == "[":
                end = text.find("]", pos)
                if end < 0:
                    raise NewickError("unterminated comment", pos)
                pos = end + 1
            else:
                break

    def read_name():
        nonlocal pos
        skip_ws()
        if pos < n_text and text[pos] == "'":
            end = pos + 1
            buf = []
            while True:
                if end >= n_text:
                    raise NewickError("unterminated quoted name", pos)
                if text[end] == "'":
                    if end + 1 < n_text and text[end + 1] == "'":
                        buf.append("'")
                        end += 2
                        continue
                    break
                buf.append(text[end])
                end += 1
            pos = end + 1
            return "".join(buf)
        start = pos
        while pos < n_text and text[pos] not in _SPECIAL and not text[pos].isspace():
            pos += 1
        name = text[start:pos]
        return name or None

    def skip_length():
        nonlocal pos
        skip_ws()
        if pos < n_text and text[pos] == ":":
            pos += 1
            skip_ws()
            start = pos
            while pos < n_text and (text[pos].isalnum() or text[pos] in ".-+"):
                pos += 1
            if start == pos:
                raise NewickError("empty branch length", pos)

    def new_node(label=None):
        adj.append([])
        labels.append(label)
        return len(adj) - 1

    def subtree():
        nonlocal pos
        skip_ws()
        if pos >= n_text:
            raise NewickError("unexpected end of input", pos)
        if text[pos] == "(":
            v = new_node()
            pos += 1
            while True:
                skip_ws()
                direction = None
                if pos < n_text and text[pos] in "<>":
                    if rooted:
                        raise NewickError("edge direction in a rooted tree", pos)
                    direction = text[pos]
                    pos += 1
                w = subtree()
                adj[v].append(w)
                adj[w].insert(0, v)
                if direction == ">":
                    arcs.append((v, w))
                elif direction == "<":
                    arcs.append((w, v))
                skip_ws()
                if pos < n_text and text[pos] == ",":
                    pos += 1
                    continue
                if pos < n_text and text[pos] == ")":
                    pos += 1
                    break
                raise NewickError("expected ',' or ')'", pos)
            read_name()  # internal names are discarded
            skip_length()
            return v
        name = read_name()
        if name is None:
            raise NewickError("empty leaf name", pos)
        v = new_node(name)
        skip_length()
        return v

    root = subtree()
    skip_ws()
    if pos >= n_text or text[pos] != ";":
        raise NewickError("expected ';'", pos)
    pos += 1
    skip_ws()
    if pos != n_text:
        raise NewickError("trailing characters after ';'", pos)
    seen = set()
    for lab in labels:
        if lab is not None:
            if lab in seen:
                raise NewickError(f"duplicate leaf label {lab!r}")
            seen.add(lab)
    return Tree(adj, labels, root=root if rooted else None, arcs=arcs)


def _quote(name) -> str:
    name = str(name)
    if any(ch in _SPECIAL or ch.isspace() for ch in name) or not name:
        return "'" + name.replace("'", "''") + "'"
    return name


def serialize_newick(tree: Tree) -> str:
    """Newick text for ``tree``; mixed edges are written with ``>``/``<``."""
    if tree.n == 0:
        return ";"
    if tree.root is not None:
        start = tree.root
    else:
        internal = tree.internal_nodes()
        start = internal[0] if internal else 0
    out: list[str] = []
    # iterative DFS emitting tokens
    stack: list = [(start, -1, 0)]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        v, par, _ = item
        kids = [w for w in tree.adj[v] if w != par]
        if par >= 0:
            if (par, v) in tree.arcs:
                out.append(">")
            elif (v, par) in tree.arcs:
                out.append("<")
        if not kids:
            lab = tree.labels[v]
            out.append(_quote(lab) if lab is not None else "")
            continue
        out.append("(")
        stack.append(")")
        for i in range(len(kids) - 1, -1, -1):
            stack.append((kids[i], v, 0))
            if i:
                stack.append(",")
    if tree.n == 2:
        # two adjacent leaves have no Newick form of their own; write the cherry
        return "(" + ",".join(_quote(tree.labels[v]) for v in range(2)) + ");"
    return "".join(out) + ";"


# ---------------------------------------------------------------------------
# Rooting, induction, restriction
# ---------------------------------------------------------------------------

def _subgraph(tree: Tree, keep: Sequence[int], root=None, keep_arcs=True) -> Tree:
    """Copy of ``tree`` restricted to ``keep`` (which must be connected)."""
    index = {v: i for i, v in enumerate(keep)}
    adj = [[index[w] for w in tree.adj[v] if w in index] for v in keep]
    labels = [tree.labels[v] for v in keep]
    arcs = ()
    if keep_arcs:
        arcs = [(index[a], index[b]) for a, b in tree.arcs if a in index and b in index]
    dummy = [index[v] for v in tree.dummy if v in index]
    base = tree.orig
    orig = [base[v] if base is not None else v for v in keep]
    new_root = index[root] if root is not None else None
    return Tree(adj, labels, root=new_root, arcs=arcs, dummy=dummy, orig=orig)


def consistent_nodes(tree: Tree, u: int) -> list[int]:
    """Nodes reachable from ``u`` without walking against a directed edge."""
    seen = {u}
    order = [u]
    queue = deque([u])
    arcs = tree.arcs
    while queue:
        v = queue.popleft()
        for w in tree.adj[v]:
            if w not in seen and (w, v) not in arcs:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def subtree_at(tree: Tree, v: int) -> Tree:
    """Rooted copy of the subtree of rooted ``tree`` below (and including) ``v``."""
    if tree.root is None:
        raise ValueError("subtree_at needs a rooted tree")
    nodes = [v]
    for x in nodes:
        nodes.extend(tree.children[x])
    sub = _subgraph(tree, nodes, root=v)
    sub.orig = None
    return sub


def root_at(tree: Tree, u: int) -> Tree:
    """
    Root ``tree`` at node ``u``.

    For a mixed tree, nodes not consistent with ``u`` (some directed edge on
    the path from ``u`` points back towards ``u``) are removed.  The result's
    ``orig`` maps new ids back to ids of ``tree``.
    """
    keep = consistent_nodes(tree, u) if tree.arcs else _bfs_order(tree, u)
    return _subgraph(tree, keep, root=u, keep_arcs=False)


def _bfs_order(tree: Tree, u: int) -> list[int]:
    seen = [False] * tree.n
    seen[u] = True
    order = [u]
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        for w in tree.adj[v]:
            if not seen[w]:
                seen[w] = True
                order.append(w)
    return order


def induced_subtree(tree: Tree, labels: Iterable) -> Tree:
    """
    The subtree of a rooted tree induced by a label set.

    Nodes are the selected leaves and their pairwise least common ancestors;
    unary pass-through nodes are contracted.  An empty label set gives the
    empty tree.
    """
    wanted = set(labels)
    parent, children, order = tree._rooted_arrays()
    count = [0] * tree.n
    for v in reversed(order):
        c = 1 if tree.labels[v] in wanted and tree.labels[v] is not None else 0
        for w in children[v]:
            c += count[w]
        count[v] = c
    if tree.n == 0 or count[tree.root] == 0:
        return Tree.empty()
    # representative: the node itself if it branches (>=2 occupied children)
    # or is a selected leaf; otherwise its single occupied child's representative
    rep = [-1] * tree.n
    kept: list[int] = []
    for v in reversed(order):
        if count[v] == 0:
            continue
        occ = [w for w in children[v] if count[w]]
        if not occ:
            rep[v] = v
            kept.append(v)
        elif len(occ) == 1 and tree.labels[v] is None:
            rep[v] = rep[occ[0]]
        else:
            rep[v] = v
            kept.append(v)
    top = rep[tree.root]
    new_parent = {}
    for v in kept:
        for w in children[v]:
            if count[w]:
                new_parent[rep[w]] = v
    kept.reverse()  # preorder-compatible (parents first)
    index = {v: i for i, v in enumerate(kept)}
    par = [index[new_parent[v]] if v != top else -1 for v in kept]
    labs = [tree.labels[v] for v in kept]
    base = tree.orig
    orig = [base[v] if base is not None else v for v in kept]
    return Tree.from_parents(par, labs, orig=orig)


def restrict_labels(tree: Tree, labels: Iterable, contract: bool | None = None) -> Tree:
    """
    Minimal subtree of an unrooted or mixed tree spanning the given labels.

    With ``contract`` (the default for trees without directed edges) degree-2
    nodes are suppressed as well, giving the unrooted induced subtree.  Mixed
    trees keep their degree-2 nodes because directions on merged edges could
    not be represented faithfully.
    """
    if tree.root is not None:
        return induced_subtree(tree, labels)
    wanted = set(labels) & tree.leaf_labels()
    if contract is None:
        contract = not tree.arcs
    if not wanted:
        return Tree.empty()
    if len(wanted) == 1:
        lab = next(iter(wanted))
        v = tree.leaf_of(lab)
        base = tree.orig
        return Tree([[]], [lab], orig=[base[v] if base is not None else v])
    # prune unlabeled / unwanted leaves repeatedly
    deg = [len(a) for a in tree.adj]
    alive = [True] * tree.n
    queue = deque(v for v in range(tree.n) if deg[v] <= 1 and tree.labels[v] not in wanted)
    while queue:
        v = queue.popleft()
        if not alive[v]:
            continue
        alive[v] = False
        for w in tree.adj[v]:
            if alive[w]:
                deg[w] -= 1
                if deg[w] <= 1 and tree.labels[w] not in wanted:
                    queue.append(w)
    keep = [v for v in range(tree.n) if alive[v]]
    sub = _subgraph(tree, keep)
    if not contract:
        return sub
    return _suppress_degree_two(sub)


def _suppress_degree_two(tree: Tree) -> Tree:
    n = tree.n
    if n <= 2:
        return tree
    keep = [v for v in range(n) if len(tree.adj[v]) != 2 or tree.labels[v] is not None]
    keep_set = set(keep)
    new_adj = {v: [] for v in keep}
    for v in keep:
        for w in tree.adj[v]:
            prev, cur = v, w
            while cur not in keep_set:
                a, b = tree.adj[cur]
                prev, cur = cur, (b if a == prev else a)
            new_adj[v].append(cur)
    index = {v: i for i, v in enumerate(keep)}
    adj = [[index[w] for w in new_adj[v]] for v in keep]
    base = tree.orig
    orig = [base[v] if base is not None else v for v in keep]
    return Tree(adj, [tree.labels[v] for v in keep], orig=orig)


# ---------------------------------------------------------------------------
# Separators, components, dummy nodes
# ---------------------------------------------------------------------------

def _component_profile(tree: Tree):
    """Preorder from node 0 and, per node, the largest component of tree - v."""
    n = tree.n
    order = []
    parent = [-1] * n
    stack = [0]
    seen = [False] * n
    seen[0] = True
    while stack:
        v = stack.pop()
        order.append(v)
        for w in reversed(tree.adj[v]):
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                stack.append(w)
    size = [1] * n
    for v in reversed(order):
        if parent[v] >= 0:
            size[parent[v]] += size[v]
    largest = [0] * n
    for v in range(n):
        best = n - size[v]
        for w in tree.adj[v]:
            if w != parent[v] and size[w] > best:
                best = size[w]
        largest[v] = best
    return order, largest


def find_separator(tree: Tree) -> int:
    """
    An internal node whose removal leaves components of at most half the
    tree's nodes.

    Among all such nodes the one with the smallest largest component wins;
    ties go to the node visited first by a preorder walk from node 0.
    """
    if tree.n < 3:
        raise ValueError("a separator needs a tree with at least 3 nodes")
    order, largest = _component_profile(tree)
    best = None
    for v in order:
        if len(tree.adj[v]) < 2:
            continue
        if best is None or largest[v] < largest[best]:
            best = v
    assert largest[best] <= tree.n // 2
    return best


def components_without(tree: Tree, x: int) -> list[tuple[int, list[int]]]:
    """Components of ``tree - {x}`` as ``(neighbour of x, node list)`` pairs."""
    out = []
    for v in tree.adj[x]:
        comp = [v]
        seen = {x, v}
        i = 0
        while i < len(comp):
            a = comp[i]
            i += 1
            for w in tree.adj[a]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
        out.append((v, comp))
    return out


def insert_dummy_nodes(tree: Tree) -> Tree:
    """Subdivide every edge of an unrooted tree with an unlabeled dummy node."""
    if tree.root is not None:
        raise ValueError("dummy nodes are inserted into unrooted trees")
    n = tree.n
    adj = [list(a) for a in tree.adj]
    labels = list(tree.labels)
    arcs = []
    dummy = []
    orig = list(tree.orig) if tree.orig is not None else list(range(n))
    for a, b in tree.edges():
        d = len(adj)
        adj.append([a, b])
        labels.append(None)
        orig.append(-1)
        dummy.append(d)
        adj[a][adj[a].index(b)] = d
        adj[b][adj[b].index(a)] = d
        if (a, b) in tree.arcs:
            arcs += [(a, d), (d, b)]
        elif (b, a) in tree.arcs:
            arcs += [(b, d), (d, a)]
    return Tree(adj, labels, arcs=arcs, dummy=set(tree.dummy) | set(dummy), orig=orig)


# ---------------------------------------------------------------------------
# Preorder numbering
# ---------------------------------------------------------------------------

class PreorderIndex:
    """
    Preorder numbers in ``[1, h]`` and proper-descendant counts.

    The descendants of ``v`` are exactly the nodes numbered
    ``number[v] .. number[v] + desc_count[v]``.
    """

    __slots__ = ("number", "desc_count", "node_at")

    def __init__(self, number, desc_count, node_at):
        self.number = number
        self.desc_count = desc_count
        self.node_at = node_at

    def interval(self, v: int) -> tuple[int, int]:
        return self.number[v], self.number[v] + self.desc_count[v]


def preorder_index(tree: Tree) -> PreorderIndex:
    parent, children, order = tree._rooted_arrays()
    n = tree.n
    number = [0] * n
    for i, v in enumerate(order, start=1):
        number[v] = i
    desc = [0] * n
    for v in reversed(order):
        p = parent[v]
        if p >= 0:
            desc[p] += desc[v] + 1
    return PreorderIndex(number, desc, [None] + list(order))


# ---------------------------------------------------------------------------
# Isomorphism
# ---------------------------------------------------------------------------

def _canonical_rooted(tree: Tree, v: int, parent: int) -> str:
    stack = [(v, parent, False)]
    result: dict[int, str] = {}
    while stack:
        a, p, done = stack.pop()
        kids = [w for w in tree.adj[a] if w != p]
        if not done:
            stack.append((a, p, True))
            for w in kids:
                stack.append((w, a, False))
            continue
        if not kids:
            lab = tree.labels[a]
            result[a] = "L" + repr(lab)
        else:
            result[a] = "(" + ",".join(sorted(result[w] for w in kids)) + ")"
    return result[v]


def isomorphic(t1: Tree, t2: Tree) -> bool:
    """
    Label-preserving isomorphism test.

    Rooted trees are compared as rooted; unrooted ones by trying every
    rooting of ``t2`` against a fixed rooting of ``t1``.  Edge directions are
    ignored.
    """
    if t1.n != t2.n:
        return False
    if t1.n == 0:
        return True
    if t1.root is not None and t2.root is not None:
        return _canonical_rooted(t1, t1.root, -1) == _canonical_rooted(t2, t2.root, -1)
    a = _canonical_rooted(t1, 0, -1)
    return any(_canonical_rooted(t2, v, -1) == a for v in range(t2.n))
