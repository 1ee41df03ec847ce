"""
Label compression: shrunk trees and annotated (compressed) trees.

Shrinking replaces one or two rooted subtrees of a tree by single *shrunk*
leaves ``gamma_1`` / ``gamma_2``.  Compression does the complementary thing
on the other tree: everything whose labels lie inside the shrunk subtrees is
folded into a constant number of compressed nodes per skeleton edge, each
annotated with precomputed agreement scores against the shrunk subtrees.

Node kinds of an :class:`AnnotatedTree`:

``ATOMIC``         labeled leaf kept verbatim
``ORDINARY``       skeleton internal node (an LCA of atomic leaves, or the root)
``COMP_LEAF``      compressed leaf ``z`` standing for a set of whole subtrees
``AUX_LEAF``       unlabeled placeholder leaf (``z-bar``, ``z-double-bar``)
``COMP_INTERNAL``  compressed path node ``p1``
``AUX_INTERNAL``   placeholder path node ``p1-bar`` (two-subtree form only)

Slot conventions: the one-subtree form stores its single score in
``alpha1``; in the two-subtree form ``alpha1``/``alpha2`` refer to
``gamma_1``/``gamma_2`` and ``alphap`` to the joined tree ``R+``.  A ``beta``
value counts only pairs whose two parts are both positive; 0 means that no
such pair exists.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tree import Tree, induced_subtree, root_at

__all__ = [
    "ATOMIC",
    "ORDINARY",
    "COMP_LEAF",
    "AUX_LEAF",
    "COMP_INTERNAL",
    "AUX_INTERNAL",
    "KIND_NAMES",
    "AnnotatedTree",
    "ShrunkTree",
    "Member",
    "assemble_leaf",
    "shrink",
    "compress",
    "compress_one",
    "compress_two",
    "join_trees",
    "plain_annotated",
    "canonical_form",
    "annotated_newick",
]

ATOMIC, ORDINARY, COMP_LEAF, AUX_LEAF, COMP_INTERNAL, AUX_INTERNAL = range(6)
KIND_NAMES = ["atomic", "ordinary", "comp", "aux", "p1", "p1bar"]
_AUX = (AUX_LEAF, AUX_INTERNAL)


class AnnotatedTree:
    """
    Rooted tree with node kinds and annotation slots.

    Nodes are appended through :meth:`add`; node 0 is the root.  Annotation
    arrays are numpy ``int64`` vectors indexed by node id.

    Attributes
    ----------
    form : int
        0 (plain), 1 (one shrunk subtree) or 2 (two shrunk subtrees).
    tnode : list of int
        For skeleton nodes and ``p1`` nodes, the node of the uncompressed tree
        they stand for; ``-1`` otherwise.
    leaf_case : list of int
        For compressed leaves, 1 if built from attached subtrees and 2 if
        built from hanging subtrees.
    members : list or None
        Uncompressed subtree roots behind each compressed leaf, when the tree
        was built from the uncompressed tree.
    """

    def __init__(self, form: int = 0):
        self.form = form
        self.parent: list[int] = []
        self.children: list[list[int]] = []
        self.kind: list[int] = []
        self.label: list = []
        self.tnode: list[int] = []
        self.leaf_case: list[int] = []
        self.members: list | None = None
        self._frozen = False

    # -- construction -----------------------------------------------------
    def add(self, parent: int, kind: int, label=None, tnode: int = -1, case: int = 0) -> int:
        v = len(self.kind)
        self.parent.append(parent)
        self.children.append([])
        self.kind.append(kind)
        self.label.append(label)
        self.tnode.append(tnode)
        self.leaf_case.append(case)
        if parent >= 0:
            self.children[parent].append(v)
        return v

    def freeze(self) -> "AnnotatedTree":
        n = len(self.kind)
        z = lambda: np.zeros(n, dtype=np.int64)  # noqa: E731
        self.alpha1, self.alpha2, self.alphap = z(), z(), z()
        self.beta, self.beta12, self.beta21 = z(), z(), z()
        self._frozen = True
        self._post = None
        self._leaf_of = None
        self._atomic_count = None
        return self

    # -- queries ----------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.kind)

    def __len__(self):
        return len(self.kind)

    @property
    def root(self) -> int:
        return 0

    def postorder(self) -> list[int]:
        if self._post is None:
            order = []
            stack = [0] if self.n else []
            while stack:
                v = stack.pop()
                order.append(v)
                stack.extend(self.children[v])
            self._post = order[::-1]
        return self._post

    def preorder(self) -> list[int]:
        return self.postorder()[::-1]

    def _rooted_arrays(self):
        return self.parent, self.children, self.preorder()

    def atomic_labels(self) -> set:
        return {self.label[v] for v in range(self.n) if self.kind[v] == ATOMIC}

    def leaf_of(self, label) -> int:
        if self._leaf_of is None:
            self._leaf_of = {self.label[v]: v for v in range(self.n) if self.kind[v] == ATOMIC}
        return self._leaf_of[label]

    def atomic_count(self) -> np.ndarray:
        if self._atomic_count is None:
            cnt = np.zeros(self.n, dtype=np.int64)
            for v in self.postorder():
                c = 1 if self.kind[v] == ATOMIC else 0
                for w in self.children[v]:
                    c += cnt[w]
                cnt[v] = c
            self._atomic_count = cnt
        return self._atomic_count

    def count_kinds(self) -> dict:
        out = {}
        for k in self.kind:
            out[KIND_NAMES[k]] = out.get(KIND_NAMES[k], 0) + 1
        return out

    def as_tree(self) -> Tree:
        """Plain rooted :class:`Tree` with the same shape (labels on atomic leaves)."""
        return Tree.from_parents(self.parent, [self.label[v] if self.kind[v] == ATOMIC else None
                                               for v in range(self.n)])

    def __repr__(self):
        return f"<AnnotatedTree form={self.form} nodes={self.n} {self.count_kinds()}>"


def plain_annotated(t: Tree) -> AnnotatedTree:
    """Wrap a plain rooted tree as a form-0 :class:`AnnotatedTree`."""
    w = AnnotatedTree(0)
    if t.n == 0:
        return w.freeze()
    _, children, order = t._rooted_arrays()
    ids = {}
    for v in order:
        p = t.parent[v]
        if children[v]:
            kind, lab = ORDINARY, None
        elif t.labels[v] is not None:
            kind, lab = ATOMIC, t.labels[v]
        else:
            kind, lab = AUX_LEAF, None
        ids[v] = w.add(ids[p] if p >= 0 else -1, kind, lab, tnode=v)
    return w.freeze()


class ShrunkTree:
    """
    A tree (rooted or not) with at most two shrunk leaves.

    Parameters
    ----------
    tree : Tree
        Shape; shrunk leaves are unlabeled leaves of this tree.
    slot : list of int
        ``slot[v]`` is 1 or 2 for the shrunk leaves and 0 elsewhere.
    keys : dict, optional
        Slot to an identifier of the replaced subtree (for instance an
        oriented edge ``(a, b)`` of a base tree).
    borig : list of int, optional
        Node of the base tree behind every node (``-1`` for shrunk leaves).
    """

    def __init__(self, tree: Tree, slot: Sequence[int], keys=None, borig=None):
        self.tree = tree
        self.slot = list(slot)
        self.keys = dict(keys or {})
        self.borig = borig
        if len(self.slot) != tree.n:
            raise ValueError("slot list length differs from node count")
        seen = [s for s in self.slot if s]
        if len(seen) != len(set(seen)) or any(s not in (1, 2) for s in seen):
            raise ValueError("at most one shrunk leaf per slot (slots 1 and 2)")
        for v, s in enumerate(self.slot):
            if s and (tree.labels[v] is not None or len(tree.adj[v]) > 1):
                raise ValueError("shrunk leaves must be unlabeled leaves")

    @property
    def n(self) -> int:
        return self.tree.n

    def shrunk(self) -> dict[int, int]:
        """Slot to node."""
        return {s: v for v, s in enumerate(self.slot) if s}

    def atomic_labels(self) -> set:
        return self.tree.leaf_labels()

    def rooted_at(self, y: int) -> "ShrunkTree":
        """Rooted copy at ``y``; ``tree.orig`` maps back to ids of this tree."""
        plain = Tree(self.tree.adj, self.tree.labels, arcs=self.tree.arcs)
        t = root_at(plain, y)
        slot = [self.slot[v] for v in t.orig]
        borig = [self.borig[v] for v in t.orig] if self.borig is not None else None
        return ShrunkTree(t, slot, self.keys, borig)

    def meet(self) -> int:
        """Least common ancestor of the two shrunk leaves (rooted form), or -1."""
        sh = self.shrunk()
        if len(sh) < 2 or self.tree.root is None:
            return -1
        par = self.tree.parent
        anc = set()
        v = sh[1]
        while v >= 0:
            anc.add(v)
            v = par[v]
        v = sh[2]
        while v not in anc:
            v = par[v]
        return v

    def __repr__(self):
        return f"<ShrunkTree nodes={self.n} shrunk={self.shrunk()} rooted={self.tree.root is not None}>"


# ---------------------------------------------------------------------------
# Shrinking
# ---------------------------------------------------------------------------

def shrink(t: Tree, roots: Sequence) -> ShrunkTree:
    """
    Replace one or two disjoint rooted subtrees by shrunk leaves.

    For a rooted ``t`` each entry of ``roots`` is a node ``v`` (the subtree
    ``t^v``); for an unrooted ``t`` it is an oriented edge ``(a, b)``
    naming the side of ``b`` away from ``a``.  The i-th subtree becomes the
    shrunk leaf of slot ``i + 1``.
    """
    if not 1 <= len(roots) <= 2:
        raise ValueError("one or two subtrees can be shrunk")
    sides = []
    for r in roots:
        if t.root is not None:
            if isinstance(r, tuple):
                raise ValueError("rooted trees take subtree roots, not edges")
            sides.append((t.parent[r], r))
        else:
            sides.append(tuple(r))
    cut_sets = []
    for a, b in sides:
        comp = {b}
        stack = [b]
        while stack:
            v = stack.pop()
            for w in t.adj[v]:
                if w != a and w not in comp:
                    comp.add(w)
                    stack.append(w)
        cut_sets.append(comp)
    if len(cut_sets) == 2 and (cut_sets[0] & cut_sets[1]):
        raise ValueError("shrunk subtrees overlap")
    removed = set().union(*cut_sets)
    keep = [v for v in range(t.n) if v not in removed]
    index = {v: i for i, v in enumerate(keep)}
    adj = [[index[w] for w in t.adj[v] if w in index] for v in keep]
    labels = [t.labels[v] for v in keep]
    slot = [0] * len(keep)
    borig = list(keep)
    keys = {}
    arcs = [(index[a], index[b]) for a, b in t.arcs if a in index and b in index]
    root = index[t.root] if t.root is not None and t.root in index else None
    for s, (a, b) in enumerate(sides, start=1):
        g = len(adj)
        adj.append([])
        labels.append(None)
        slot.append(s)
        borig.append(-1)
        keys[s] = (a, b)
        if a >= 0:
            adj[index[a]].append(g)
            adj[g].append(index[a])
            if (a, b) in t.arcs:
                arcs.append((index[a], g))
            elif (b, a) in t.arcs:
                arcs.append((g, index[a]))
        else:
            root = g  # the whole rooted tree was shrunk
    out = Tree(adj, labels, root=root, arcs=arcs if root is None else ())
    return ShrunkTree(out, slot, keys, borig)


# ---------------------------------------------------------------------------
# Compressed-leaf assembly
# ---------------------------------------------------------------------------

class Member:
    """
    One constituent of a compressed leaf.

    ``v1``/``v2``/``vp`` are its best scores against ``R1``/``R2``/``R+``;
    ``pos`` orders hanging members from the top of the path; the ``intra``
    fields carry pair values realised inside a member that itself stands for
    several subtrees.
    """

    __slots__ = ("v1", "v2", "vp", "pos", "intra", "intra12", "intra21")

    def __init__(self, v1=0, v2=0, vp=0, pos=0, intra=0, intra12=0, intra21=0):
        self.v1, self.v2, self.vp, self.pos = int(v1), int(v2), int(vp), pos
        self.intra, self.intra12, self.intra21 = int(intra), int(intra12), int(intra21)


def _best_cross(group: list[Member]) -> int:
    """Best ``v1(a) + v2(b)`` over distinct members with both parts positive."""
    best = 0
    a = sorted(((m.v1, i) for i, m in enumerate(group) if m.v1 > 0), reverse=True)[:2]
    b = sorted(((m.v2, i) for i, m in enumerate(group) if m.v2 > 0), reverse=True)[:2]
    for va, ia in a:
        for vb, ib in b:
            if ia != ib and va + vb > best:
                best = va + vb
    return best


def assemble_leaf(case: int, members: list[Member], form: int) -> tuple:
    """
    Annotation values ``(alpha1, alpha2, alphap, beta, beta12, beta21)`` of a
    compressed leaf built from ``members``.
    """
    a1 = max((m.v1 for m in members), default=0)
    if form < 2:
        return a1, 0, 0, 0, 0, 0
    a2 = max((m.v2 for m in members), default=0)
    ap = max((m.vp for m in members), default=0)
    if case == 1:
        beta = max(max((m.intra for m in members), default=0), _best_cross(members))
        return a1, a2, ap, beta, 0, 0
    by_pos: dict = {}
    for m in members:
        by_pos.setdefault(m.pos, []).append(m)
    beta = max((m.intra for m in members), default=0)
    b12 = max((m.intra12 for m in members), default=0)
    b21 = max((m.intra21 for m in members), default=0)
    best1 = best2 = 0  # best v1 / v2 strictly above the current position
    for pos in sorted(by_pos):
        grp = by_pos[pos]
        beta = max(beta, _best_cross(grp))
        for m in grp:
            if best1 > 0 and m.v2 > 0:
                b12 = max(b12, best1 + m.v2)
            if best2 > 0 and m.v1 > 0:
                b21 = max(b21, best2 + m.v1)
        for m in grp:
            best1 = max(best1, m.v1)
            best2 = max(best2, m.v2)
    return a1, a2, ap, beta, b12, b21


def _set_leaf(w: AnnotatedTree, z: int, values: tuple):
    w.alpha1[z], w.alpha2[z], w.alphap[z], w.beta[z], w.beta12[z], w.beta21[z] = values


# ---------------------------------------------------------------------------
# Compression from the uncompressed tree
# ---------------------------------------------------------------------------

def join_trees(r1: Tree | None, r2: Tree | None) -> Tree | None:
    """Join two rooted trees under a fresh root (``R+``)."""
    parts = [r for r in (r1, r2) if r is not None and r.n]
    if not parts:
        return None
    if len(parts) == 1:
        return parts[0]
    parent = [-1]
    labels = [None]
    for r in parts:
        off = len(parent)
        for v in range(r.n):
            p = r.parent[v]
            parent.append(off + p if p >= 0 else 0)
            labels.append(r.labels[v])
    return Tree.from_parents(parent, labels)


def _skeleton(t: Tree, J: set):
    parent, children, order = t._rooted_arrays()
    has = [0] * t.n
    for v in reversed(order):
        c = 1 if (t.labels[v] is not None and t.labels[v] in J) else 0
        for w in children[v]:
            c += 1 if has[w] else 0
        has[v] = c
    # has[v] > 0 iff the subtree holds a J label; for internal v it counts
    # the children whose subtrees hold one
    skel = [False] * t.n
    for v in range(t.n):
        if v == t.root or (t.labels[v] is not None and t.labels[v] in J):
            skel[v] = True
        elif children[v] and has[v] >= 2:
            skel[v] = True
    return children, has, skel


def compress(t: Tree, J: set, subtrees: Sequence, oracle: Callable) -> AnnotatedTree:
    """
    Compress rooted ``t`` keeping the labels ``J`` atomic.

    Parameters
    ----------
    t : Tree
        Rooted uncompressed tree.
    J : set
        Labels that stay atomic.  Every subtree without such labels is
        compressed.
    subtrees : sequence of Tree or None
        One entry (``R``) or two entries (``R1``, ``R2``); ``None`` or an empty
        tree stands for an empty subtree.
    oracle : callable
        ``oracle(R)`` returns a sequence with ``mast(t^v, R)`` for every node
        ``v`` of ``t`` (all zeros for an empty ``R``).
    """
    form = len(subtrees)
    if form not in (1, 2):
        raise ValueError("compression takes one or two subtrees")
    J = set(J)
    rs = [r if (r is not None and r.n) else None for r in subtrees]
    if form == 2 and rs[0] is not None and rs[1] is not None:
        if rs[0].leaf_labels() & rs[1].leaf_labels():
            raise ValueError("the two subtrees must be label-disjoint")

    def score(r):
        return np.zeros(t.n, dtype=np.int64) if r is None else np.asarray(oracle(r), dtype=np.int64)

    val1 = score(rs[0])
    val2 = score(rs[1]) if form == 2 else None
    valp = score(join_trees(rs[0], rs[1])) if form == 2 else None

    w = AnnotatedTree(form)
    w.members = []
    if t.n == 0:
        return w.freeze()
    children, has, skel = _skeleton(t, J)
    depth = [0] * t.n
    for v in t.preorder:
        if t.parent[v] >= 0:
            depth[v] = depth[t.parent[v]] + 1

    leaf_members: dict[int, list] = {}
    pending_values: list = []

    def member(s, pos=0):
        m = Member(val1[s], val2[s] if form == 2 else 0, valp[s] if form == 2 else 0, pos)
        return m

    stack = [(t.root, -1, [])]  # (skeleton node, W parent, path above it)
    while stack:
        y, wpar, path = stack.pop()
        hanging = []
        for q in path:
            for c in children[q]:
                if not has[c]:
                    hanging.append((c, q))
        attach = wpar
        if hanging:
            p_top = min((q for _, q in hanging), key=lambda q: depth[q])
            if form == 1:
                p1 = w.add(wpar, COMP_INTERNAL, tnode=p_top)
                z = w.add(p1, COMP_LEAF, case=2)
                attach = p1
            else:
                p1 = w.add(wpar, COMP_INTERNAL, tnode=p_top)
                z = w.add(p1, COMP_LEAF, case=2)
                w.add(p1, AUX_LEAF)
                pbar = w.add(p1, AUX_INTERNAL)
                w.add(pbar, AUX_LEAF)
                attach = pbar
            leaf_members[z] = [(c, q) for c, q in hanging]
            pending_values.append(("p1", p1, p_top))
        is_atomic = not children[y] and t.labels[y] is not None and t.labels[y] in J
        v = w.add(attach, ATOMIC if is_atomic else ORDINARY,
                  t.labels[y] if is_atomic else None, tnode=y)
        if not is_atomic:
            pending_values.append(("node", v, y))
        attached = [c for c in children[y] if not has[c]]
        if attached:
            z = w.add(v, COMP_LEAF, case=1)
            if form == 2:
                w.add(v, AUX_LEAF)
            leaf_members[z] = [(c, y) for c in attached]
        for c in reversed([c for c in children[y] if has[c]]):
            sub_path = []
            d = c
            while not skel[d]:
                sub_path.append(d)
                d = next(x for x in children[d] if has[x])
            stack.append((d, v, sub_path))

    w.freeze()
    w.members = [None] * w.n
    for what, v, s in pending_values:
        w.alpha1[v] = val1[s]
        if form == 2:
            w.alpha2[v] = val2[s]
            if what == "p1":
                w.alphap[v] = valp[s]
    for z, mem in leaf_members.items():
        w.members[z] = [c for c, _ in mem]
        ms = [member(c, depth[q]) for c, q in mem]
        _set_leaf(w, z, assemble_leaf(w.leaf_case[z], ms, form))
    return w


def compress_one(t: Tree, r: Tree | None, oracle: Callable) -> AnnotatedTree:
    """``t`` compressed with respect to one rooted subtree ``r``."""
    K = r.leaf_labels() if r is not None else set()
    return compress(t, t.leaf_labels() - K, [r], oracle)


def compress_two(t: Tree, r1: Tree | None, r2: Tree | None, oracle: Callable) -> AnnotatedTree:
    """``t`` compressed with respect to two label-disjoint rooted subtrees."""
    K1 = r1.leaf_labels() if r1 is not None else set()
    K2 = r2.leaf_labels() if r2 is not None else set()
    if K1 & K2:
        raise ValueError("the two subtrees must be label-disjoint")
    return compress(t, t.leaf_labels() - K1 - K2, [r1, r2], oracle)


# ---------------------------------------------------------------------------
# Canonical forms and debug output
# ---------------------------------------------------------------------------

def _node_tag(w: AnnotatedTree, v: int) -> str:
    k = w.kind[v]
    if k == ATOMIC:
        return repr(w.label[v])
    if k in _AUX:
        return KIND_NAMES[k]
    vals = [int(w.alpha1[v])]
    if w.form == 2:
        vals += [int(w.alpha2[v])]
        if k in (COMP_LEAF, COMP_INTERNAL):
            vals += [int(w.alphap[v])]
        if k == COMP_LEAF:
            vals += [int(w.beta[v])]
            if w.leaf_case[v] == 2:
                vals += [int(w.beta12[v]), int(w.beta21[v])]
    if w.form == 0:
        vals = []
    case = f"c{w.leaf_case[v]}" if k == COMP_LEAF else ""
    return KIND_NAMES[k] + case + ("[" + ",".join(map(str, vals)) + "]" if vals else "")


def canonical_form(w: AnnotatedTree) -> str:
    """Order-independent string of shape, kinds and annotations."""
    if w.n == 0:
        return "()"
    out: dict[int, str] = {}
    for v in w.postorder():
        tag = _node_tag(w, v)
        if w.children[v]:
            out[v] = tag + "(" + ",".join(sorted(out[c] for c in w.children[v])) + ")"
        else:
            out[v] = tag
    return out[0]


def annotated_newick(w: AnnotatedTree) -> str:
    """Newick text with kinds and annotations in square-bracket comments."""
    if w.n == 0:
        return ";"
    out: dict[int, str] = {}
    for v in w.postorder():
        k = w.kind[v]
        note = "[&" + _node_tag(w, v) + "]" if k != ATOMIC else ""
        if w.children[v]:
            body = "(" + ",".join(out[c] for c in w.children[v]) + ")"
            out[v] = body + note
        else:
            name = str(w.label[v]) if k == ATOMIC else KIND_NAMES[k]
            out[v] = name + note
    return out[0] + ";"
