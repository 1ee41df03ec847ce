"""
Range-maximum machinery over preorder-numbered trees.

``SparseArray``
    Fixed-dimension array with O(1) reset to a common default value and
    enumeration of the cells that differ from it.
``StaticRangeMax``
    Doubling table answering ``max(seq[x..y])`` in O(1) (1-based, inclusive).
``SubtreeMaxIndex``
    For arrays ``A_z`` attached to the nodes of a rooted tree, answers
    ``max{A_z[i] : z in subtree(v)}``.  Each array is mostly its own default
    ``c_z``; only the overrides are ever inspected, so building costs time
    proportional to the number of overrides rather than ``b * h``.
``AttachmentIndex``
    Maximum score over subtrees hanging off one node (children in a numbered
    interval) or off a vertical path.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from typing import Sequence

import numpy as np

__all__ = [
    "SparseArray",
    "StaticRangeMax",
    "range_max",
    "SubtreeMaxIndex",
    "build_subtree_index",
    "query_subtree_max",
    "AttachmentIndex",
    "build_attachment_index",
    "NEG",
]

NEG = float("-inf")


class SparseArray:
    """
    Array of dimension ``b`` whose cells default to ``default``.

    Cells are validated by a generation stamp, so :meth:`reset` is O(1) no
    matter how many cells were written before.
    """

    __slots__ = ("b", "default", "_val", "_stamp", "_gen", "_keys")

    def __init__(self, b: int, default=0):
        self.b = int(b)
        self.default = default
        self._val = [None] * self.b
        self._stamp = [0] * self.b
        self._gen = 1
        self._keys: list[int] = []

    def reset(self, default=None):
        if default is not None:
            self.default = default
        self._gen += 1
        self._keys = []

    def __len__(self):
        return self.b

    def __getitem__(self, i: int):
        if self._stamp[i] == self._gen:
            return self._val[i]
        return self.default

    def __setitem__(self, i: int, value):
        if not 0 <= i < self.b:
            raise IndexError(i)
        if self._stamp[i] != self._gen:
            self._stamp[i] = self._gen
            self._keys.append(i)
        self._val[i] = value

    def overrides(self) -> list[tuple[int, object]]:
        """Written cells whose value differs from the default, by index."""
        out = []
        for i in self._keys:
            v = self._val[i]
            if v != self.default:
                out.append((i, v))
        out.sort()
        return out

    def distinct_values(self) -> set:
        vals = {v for _, v in self.overrides()}
        vals.add(self.default)
        return vals

    def to_list(self) -> list:
        return [self[i] for i in range(self.b)]

    @classmethod
    def from_values(cls, values: Sequence, default=None) -> "SparseArray":
        """Build from a dense sequence; the default is its most common value."""
        if default is None:
            vals, counts = np.unique(np.asarray(values), return_counts=True)
            default = vals[int(np.argmax(counts))].item() if len(vals) else 0
        arr = cls(len(values), default)
        for i, v in enumerate(values):
            if v != default:
                arr[i] = v
        return arr

    def __repr__(self):
        return f"SparseArray(b={self.b}, default={self.default!r}, overrides={self.overrides()})"


class StaticRangeMax:
    """
    Doubling table over a fixed sequence.

    ``query(x, y)`` returns ``max(source[x..y])`` with 1-based inclusive bounds.
    """

    def __init__(self, seq: Sequence):
        src = np.asarray(seq, dtype=float)
        if src.ndim != 1 or len(src) == 0:
            raise ValueError("range max needs a nonempty 1-d sequence")
        self.h = len(src)
        levels = [src]
        span = 1
        while 2 * span <= self.h:
            prev = levels[-1]
            levels.append(np.maximum(prev[:-span], prev[span:]))
            span *= 2
        self._levels = levels

    def query(self, x: int, y: int):
        if not 1 <= x <= y <= self.h:
            raise IndexError(f"range [{x}, {y}] outside [1, {self.h}]")
        k = (y - x + 1).bit_length() - 1
        lvl = self._levels[k]
        a, b = lvl[x - 1], lvl[y - (1 << k)]
        return a if a >= b else b

    def query_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`query` for arrays of bounds (all valid)."""
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        out = np.empty(len(xs))
        lens = ys - xs + 1
        ks = np.floor(np.log2(np.maximum(lens, 1))).astype(np.int64)
        for k in np.unique(ks):
            sel = ks == k
            lvl = self._levels[k]
            out[sel] = np.maximum(lvl[xs[sel] - 1], lvl[ys[sel] - (1 << int(k))])
        return out


def range_max(seq: Sequence) -> StaticRangeMax:
    return StaticRangeMax(seq)


class _Column:
    """Interleaved structure for one column with a nonempty ``Gamma_i``."""

    __slots__ = ("rows", "rmq")

    def __init__(self, rows: list[int], values: list, default_rmq: StaticRangeMax):
        self.rows = rows
        seq = []
        for k, (r, v) in enumerate(zip(rows, values)):
            if k:
                lo = rows[k - 1] + 1
                seq.append(default_rmq.query(lo, r - 1) if lo <= r - 1 else NEG)
            seq.append(v)
        self.rmq = StaticRangeMax(seq)


class SubtreeMaxIndex:
    """
    Answers ``max{A_z[i] : z in subtree(v)}``.

    Rows are preorder numbers ``1..h``.  ``gamma[i]`` lists, in ascending
    order, the rows whose array overrides column ``i``.  Per-column
    structures are materialised on first use.
    """

    def __init__(self, b: int, defaults: list, gamma: list[list[int]], cells: list[dict],
                 pre):
        self.b = b
        self.h = len(defaults) - 1
        self.defaults = defaults  # c_z by row (index 0 unused)
        self.gamma = gamma
        self._cells = cells  # per column: row -> value
        self.pre = pre
        self.default_rmq = StaticRangeMax(defaults[1:])
        self._columns: dict[int, _Column] = {}
        self.cell_reads = 0

    def _column(self, i: int) -> _Column | None:
        if not self.gamma[i]:
            return None
        col = self._columns.get(i)
        if col is None:
            rows = self.gamma[i]
            col = _Column(rows, [self._cells[i][r] for r in rows], self.default_rmq)
            self._columns[i] = col
        return col

    def query_rows(self, p: int, q: int, i: int):
        """Maximum of column ``i`` over preorder rows ``p..q``."""
        col = self._column(i)
        if col is None:
            return self.default_rmq.query(p, q)
        rows = col.rows
        s = bisect_left(rows, p)
        t = bisect_right(rows, q) - 1
        if s > t:
            return self.default_rmq.query(p, q)
        best = col.rmq.query(2 * s + 1, 2 * t + 1)
        if p < rows[s]:
            best = max(best, self.default_rmq.query(p, rows[s] - 1))
        if rows[t] < q:
            best = max(best, self.default_rmq.query(rows[t] + 1, q))
        return best

    def query(self, v: int, i: int):
        p = self.pre.number[v]
        return self.query_rows(p, p + self.pre.desc_count[v], i)

    def dump(self) -> str:
        """Line-oriented listing of the nonempty ``Gamma_i`` tables."""
        lines = [f"h {self.h} b {self.b}"]
        for i, rows in enumerate(self.gamma):
            if rows:
                body = " ".join(f"{r}:{self._cells[i][r]}" for r in rows)
                lines.append(f"gamma {i} {body}")
        return "\n".join(lines) + "\n"


def build_subtree_index(arrays: Sequence[SparseArray], pre) -> SubtreeMaxIndex:
    """
    Build a :class:`SubtreeMaxIndex`.

    Parameters
    ----------
    arrays : sequence of SparseArray
        ``arrays[z]`` is the array of node ``z`` (node ids, not preorder rows).
    pre : PreorderIndex
        Preorder numbering of the tree.
    """
    h = len(arrays)
    if h == 0:
        raise ValueError("no arrays")
    b = arrays[0].b
    defaults = [NEG] * (h + 1)
    gamma: list[list[int]] = [[] for _ in range(b)]
    cells: list[dict] = [dict() for _ in range(b)]
    reads = 0
    for row in range(1, h + 1):
        z = pre.node_at[row]
        arr = arrays[z]
        if arr.b != b:
            raise ValueError("all arrays must share one dimension")
        defaults[row] = arr.default
        reads += 1
        for i, val in arr.overrides():
            reads += 1
            gamma[i].append(row)
            cells[i][row] = val
    idx = SubtreeMaxIndex(b, defaults, gamma, cells, pre)
    idx.cell_reads = reads
    return idx


def query_subtree_max(idx: SubtreeMaxIndex, v: int, i: int):
    return idx.query(v, i)


class AttachmentIndex:
    """
    Maximum score over subtrees attached to a node or a vertical path.

    Children of every node are numbered from 1 in their stored order.  A
    subtree is *attached* to a path when its root is a child of a path node
    but not itself on the path.
    """

    def __init__(self, tree, score: Sequence):
        self.tree = tree
        parent, children, order = tree._rooted_arrays()
        n = tree.n
        self.score = list(score)
        flat = []
        self.start = [0] * n
        self.child_no = [0] * n
        for u in range(n):
            self.start[u] = len(flat) + 1
            for k, c in enumerate(children[u], start=1):
                self.child_no[c] = k
                flat.append(self.score[c])
        self._rmq = StaticRangeMax(flat) if flat else None
        # best score among the siblings of each node
        sib = [NEG] * n
        for u in range(n):
            ch = children[u]
            d = len(ch)
            for k, c in enumerate(ch, start=1):
                left = self.interval_query(u, 1, k - 1) if k > 1 else NEG
                right = self.interval_query(u, k + 1, d) if k < d else NEG
                sib[c] = max(left, right)
        self.depth = [0] * n
        for v in order:
            if parent[v] >= 0:
                self.depth[v] = self.depth[parent[v]] + 1
        # binary lifting of the sibling maxima along ancestor chains
        self._up = [list(parent)]
        self._mx = [sib]
        step = 1
        while step < n:
            up, mx = self._up[-1], self._mx[-1]
            self._up.append([up[up[v]] if up[v] >= 0 else -1 for v in range(n)])
            self._mx.append([max(mx[v], mx[up[v]]) if up[v] >= 0 else mx[v] for v in range(n)])
            step *= 2

    def interval_query(self, u: int, a: int, b: int):
        d = len(self.tree.children[u])
        if not 1 <= a <= b <= d:
            raise ValueError(f"child interval [{a}, {b}] invalid for node with {d} children")
        s = self.start[u]
        return self._rmq.query(s + a - 1, s + b - 1)

    def children_max(self, u: int):
        d = len(self.tree.children[u])
        return self.interval_query(u, 1, d) if d else NEG

    def hanging_query(self, top: int, below: int):
        """
        Maximum over subtrees hanging off the path from ``top`` down to the
        parent of ``below``: children of those path nodes that are neither on
        the path nor ``below`` itself.
        """
        steps = self.depth[below] - self.depth[top]
        if steps < 0:
            raise ValueError("top is not an ancestor of below")
        best = NEG
        v, k = below, 0
        while steps:
            if steps & 1:
                best = max(best, self._mx[k][v])
                v = self._up[k][v]
            steps >>= 1
            k += 1
        if v != top:
            raise ValueError("top is not an ancestor of below")
        return best

    def path_query(self, top: int, bottom: int | None = None):
        """
        Maximum over subtrees attached to the path from ``top`` down to
        ``bottom``.  A list of path nodes is also accepted as ``top``.
        """
        if bottom is None:
            nodes = list(top)
            if not nodes:
                return NEG
            top = min(nodes, key=lambda v: self.depth[v])
            bottom = max(nodes, key=lambda v: self.depth[v])
        best = self.children_max(bottom)
        steps = self.depth[bottom] - self.depth[top]
        if steps < 0:
            raise ValueError("top is not an ancestor of bottom")
        v, k = bottom, 0
        while steps:
            if steps & 1:
                best = max(best, self._mx[k][v])
                v = self._up[k][v]
            steps >>= 1
            k += 1
        if v != top:
            raise ValueError("top is not an ancestor of bottom")
        return best


def build_attachment_index(tree, score: Sequence) -> AttachmentIndex:
    return AttachmentIndex(tree, score)
