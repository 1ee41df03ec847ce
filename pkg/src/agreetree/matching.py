"""
Maximum-weight bipartite matching and the all-cavity extension.

Given a bipartite graph ``G = (X, Y, E)`` with positive integer weights, the
all-cavity problem asks for ``mwm(G - {u})`` for every node ``u``.  One
optimal matching ``M`` plus one longest-path computation in a small
auxiliary digraph ``D`` answers all of them:

* ``D`` has a sink ``t``; every unmatched ``x`` and every matched ``y`` has a
  zero-weight arc to ``t``;
* a matched edge ``(x, y)`` becomes ``x -> y`` with weight ``-w``;
* an unmatched edge ``(x, y)`` becomes ``y -> x`` with weight ``+w``.

For a matched node ``u``, ``mwm(G - {u}) = mwm(G) + L(u)`` where ``L(u)`` is
the heaviest path from ``u`` to ``t``.  An unmatched node leaves the optimum
untouched.

Digraph node numbering: ``x`` nodes are ``0 .. nx-1``, ``y`` nodes are
``nx .. nx+ny-1`` and ``t`` is ``nx+ny``.
"""

from __future__ import annotations

import heapq
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import min_weight_full_bipartite_matching

__all__ = [
    "WeightedBipartiteGraph",
    "Matching",
    "CavityDigraph",
    "CavityResult",
    "PositiveCycleError",
    "max_weight_matching",
    "build_cavity_digraph",
    "longest_path_weights",
    "all_cavity",
    "dense_mwm",
    "read_edge_list",
    "write_edge_list",
    "format_cavity",
]

# dense assignment is used below this many matrix cells
_DENSE_LIMIT = 4_000_000


class PositiveCycleError(RuntimeError):
    """The cavity digraph has a positive cycle, so the matching was not optimal."""


class WeightedBipartiteGraph:
    """
    Bipartite graph with parts of sizes ``nx`` and ``ny``.

    Parameters
    ----------
    nx, ny : int
        Part sizes.  Node ``i`` of ``X`` is ``0 <= i < nx``, likewise for ``Y``.
    edges : iterable of (x, y, w)
        Edges with positive integer weights.  Parallel edges are rejected.
    """

    def __init__(self, nx: int, ny: int, edges: Iterable = ()):
        edges = list(edges)
        self.nx = int(nx)
        self.ny = int(ny)
        if edges:
            arr = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        else:
            arr = np.zeros((0, 3), dtype=np.int64)
        self.ex = arr[:, 0].copy()
        self.ey = arr[:, 1].copy()
        self.ew = arr[:, 2].copy()
        if len(arr):
            if self.ex.min() < 0 or self.ex.max() >= self.nx:
                raise ValueError("x endpoint out of range")
            if self.ey.min() < 0 or self.ey.max() >= self.ny:
                raise ValueError("y endpoint out of range")
            if self.ew.min() <= 0:
                raise ValueError("edge weights must be positive integers")
            key = self.ex * max(self.ny, 1) + self.ey
            if len(np.unique(key)) != len(key):
                raise ValueError("parallel edges are not allowed")

    @property
    def m(self) -> int:
        return len(self.ew)

    @property
    def n(self) -> int:
        return self.nx + self.ny

    @property
    def max_weight(self) -> int:
        return int(self.ew.max()) if self.m else 0

    def edges(self) -> list[tuple[int, int, int]]:
        return list(zip(self.ex.tolist(), self.ey.tolist(), self.ew.tolist()))

    def dense(self) -> np.ndarray:
        """Weight matrix with zeros for missing edges."""
        mat = np.zeros((self.nx, self.ny), dtype=np.int64)
        mat[self.ex, self.ey] = self.ew
        return mat

    def without(self, side: str, index: int) -> "WeightedBipartiteGraph":
        """Copy with all edges at one node removed (node ids are kept)."""
        keep = self.ex != index if side == "x" else self.ey != index
        g = WeightedBipartiteGraph(self.nx, self.ny)
        g.ex, g.ey, g.ew = self.ex[keep], self.ey[keep], self.ew[keep]
        return g

    def __repr__(self):
        return f"<WeightedBipartiteGraph nx={self.nx} ny={self.ny} m={self.m}>"


@dataclass
class Matching:
    """A matching given by its partner arrays (``-1`` for unmatched)."""

    mate_x: np.ndarray
    mate_y: np.ndarray
    weight: int

    def pairs(self) -> list[tuple[int, int]]:
        return [(x, int(y)) for x, y in enumerate(self.mate_x) if y >= 0]

    def __len__(self):
        return int((self.mate_x >= 0).sum())


@dataclass
class CavityDigraph:
    """Arc list of the auxiliary digraph; node ``t`` is ``nx + ny``."""

    nx: int
    ny: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    @property
    def t(self) -> int:
        return self.nx + self.ny

    @property
    def n_nodes(self) -> int:
        return self.nx + self.ny + 1

    def arcs(self) -> list[tuple[int, int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()))


@dataclass
class CavityResult:
    """``values_x[i] = mwm(G - {x_i})`` and ``values_y[j] = mwm(G - {y_j})``."""

    mwm: int
    values_x: np.ndarray
    values_y: np.ndarray
    matching: Matching | None = field(default=None, repr=False)

    def value(self, side: str, index: int) -> int:
        return int(self.values_x[index] if side == "x" else self.values_y[index])


# ---------------------------------------------------------------------------
# Single maximum-weight matching
# ---------------------------------------------------------------------------

def _from_pairs(g: WeightedBipartiteGraph, rows, cols) -> Matching:
    mate_x = np.full(g.nx, -1, dtype=np.int64)
    mate_y = np.full(g.ny, -1, dtype=np.int64)
    mate_x[rows] = cols
    mate_y[cols] = rows
    total = 0
    if len(rows):
        lookup = dict(zip(zip(g.ex.tolist(), g.ey.tolist()), g.ew.tolist()))
        total = sum(lookup[(int(a), int(b))] for a, b in zip(rows, cols))
    return Matching(mate_x, mate_y, int(total))


def _mwm_scipy(g: WeightedBipartiteGraph) -> Matching:
    if g.m == 0:
        return _from_pairs(g, np.zeros(0, np.int64), np.zeros(0, np.int64))
    if g.nx * g.ny <= _DENSE_LIMIT:
        mat = g.dense()
        rows, cols = linear_sum_assignment(mat, maximize=True)
        keep = mat[rows, cols] > 0
        return _from_pairs(g, rows[keep], cols[keep])
    # sparse route: give every x a private zero-weight partner so that a
    # row-perfect matching always exists; costs are shifted to stay positive
    shift = g.max_weight + 1
    data = np.concatenate([shift - g.ew, np.full(g.nx, shift, dtype=np.int64)])
    rr = np.concatenate([g.ex, np.arange(g.nx)])
    cc = np.concatenate([g.ey, g.ny + np.arange(g.nx)])
    biadj = csr_matrix((data.astype(float), (rr, cc)), shape=(g.nx, g.ny + g.nx))
    rows, cols = min_weight_full_bipartite_matching(biadj)
    keep = cols < g.ny
    return _from_pairs(g, rows[keep], cols[keep])


def _mwm_ssp(g: WeightedBipartiteGraph) -> Matching:
    """Successive shortest augmenting paths with Johnson potentials."""
    nx, ny = g.nx, g.ny
    out = [[] for _ in range(nx)]
    for x, y, w in g.edges():
        out[x].append((y, w))
    mate_x = [-1] * nx
    mate_y = [-1] * ny
    # costs are -w; potentials keep reduced costs non-negative
    pot_x = [0] * nx
    pot_y = [0] * ny
    for x in range(nx):
        for y, w in out[x]:
            if -w < pot_y[y]:
                pot_y[y] = -w
    inf = float("inf")
    while True:
        dist_x = [inf] * nx
        dist_y = [inf] * ny
        prev_y = [-1] * ny
        heap = []
        for x in range(nx):
            if mate_x[x] < 0:
                dist_x[x] = 0
                heap.append((0, 0, x))
        heapq.heapify(heap)
        best, best_y = inf, -1
        while heap:
            d, side, v = heapq.heappop(heap)
            if side == 0:
                if d > dist_x[v]:
                    continue
                for y, w in out[v]:
                    if mate_x[v] == y:
                        continue
                    nd = d + (-w) + pot_x[v] - pot_y[y]
                    if nd < dist_y[y]:
                        dist_y[y] = nd
                        prev_y[y] = v
                        heapq.heappush(heap, (nd, 1, y))
            else:
                if d > dist_y[v]:
                    continue
                x = mate_y[v]
                if x < 0:
                    real = d + pot_y[v]  # pot of every source x is 0 in real terms
                    if real < best:
                        best, best_y = real, v
                    continue
                w = next(w for yy, w in out[x] if yy == v)
                nd = d + w + pot_y[v] - pot_x[x]
                if nd < dist_x[x]:
                    dist_x[x] = nd
                    heapq.heappush(heap, (nd, 0, x))
        if best_y < 0 or best >= 0:
            break
        # update potentials on the reached part
        for x in range(nx):
            if dist_x[x] < inf:
                pot_x[x] += dist_x[x]
        for y in range(ny):
            if dist_y[y] < inf:
                pot_y[y] += dist_y[y]
        y = best_y
        while y >= 0:
            x = prev_y[y]
            nxt = mate_x[x]
            mate_x[x] = y
            mate_y[y] = x
            y = nxt
    rows = np.array([x for x in range(nx) if mate_x[x] >= 0], dtype=np.int64)
    cols = np.array([mate_x[x] for x in rows], dtype=np.int64)
    return _from_pairs(g, rows, cols)


def max_weight_matching(g: WeightedBipartiteGraph, method: str = "scipy") -> Matching:
    """
    Maximum-weight matching (not necessarily of maximum cardinality).

    Parameters
    ----------
    method : {"scipy", "ssp"}
        ``"scipy"`` uses the compiled assignment solvers; ``"ssp"`` is a pure
        Python successive-shortest-path solver kept as an independent engine.
    """
    if method == "scipy":
        return _mwm_scipy(g)
    if method == "ssp":
        return _mwm_ssp(g)
    raise ValueError(f"unknown matching method {method!r}")


def dense_mwm(mat: np.ndarray) -> int:
    """Maximum-weight matching value of a non-negative weight matrix."""
    if mat.size == 0:
        return 0
    rows, cols = linear_sum_assignment(mat, maximize=True)
    return int(mat[rows, cols].sum())


# ---------------------------------------------------------------------------
# Cavity digraph and longest paths
# ---------------------------------------------------------------------------

def build_cavity_digraph(g: WeightedBipartiteGraph, m: Matching) -> CavityDigraph:
    nx, ny = g.nx, g.ny
    t = nx + ny
    mx = np.asarray(m.mate_x)
    my = np.asarray(m.mate_y)
    matched_edge = mx[g.ex] == g.ey
    if int(matched_edge.sum()) != int((mx >= 0).sum()):
        raise ValueError("matching uses an edge that is not in the graph")
    if (mx >= 0).any() and not np.array_equal(my[mx[mx >= 0]], np.nonzero(mx >= 0)[0]):
        raise ValueError("inconsistent matching partner arrays")
    free_x = np.nonzero(mx < 0)[0]
    busy_y = np.nonzero(my >= 0)[0]
    src = np.concatenate([
        free_x,
        nx + busy_y,
        g.ex[matched_edge],
        nx + g.ey[~matched_edge],
    ])
    dst = np.concatenate([
        np.full(len(free_x), t),
        np.full(len(busy_y), t),
        nx + g.ey[matched_edge],
        g.ex[~matched_edge],
    ])
    weight = np.concatenate([
        np.zeros(len(free_x) + len(busy_y), dtype=np.int64),
        -g.ew[matched_edge],
        g.ew[~matched_edge],
    ])
    return CavityDigraph(nx, ny, src.astype(np.int64), dst.astype(np.int64), weight.astype(np.int64))


# marker for nodes with no path to t
UNREACHABLE = np.iinfo(np.int64).min // 4


def longest_path_weights(d: CavityDigraph) -> np.ndarray:
    """
    Heaviest path weight from every node to ``t``.

    Label-correcting passes over the arc list; without positive cycles the
    values settle after at most ``n_nodes - 1`` passes.  Nodes that cannot
    reach ``t`` get :data:`UNREACHABLE`.
    """
    n = d.n_nodes
    dist = np.full(n, UNREACHABLE, dtype=np.int64)
    dist[d.t] = 0
    src, dst, w = d.src, d.dst, d.weight
    for _ in range(n):
        ok = dist[dst] > UNREACHABLE
        cand = np.where(ok, w + dist[dst], UNREACHABLE)
        new = dist.copy()
        np.maximum.at(new, src, cand)
        if np.array_equal(new, dist):
            return dist
        # only arcs whose head changed can improve something next round
        active = (new != dist)[d.dst]
        dist = new
        src, dst, w = d.src[active], d.dst[active], d.weight[active]
    raise PositiveCycleError("cavity digraph has a positive cycle")


def all_cavity(g: WeightedBipartiteGraph, method: str = "scipy") -> CavityResult:
    """``mwm(G - {u})`` for every node ``u`` of ``g``."""
    m = max_weight_matching(g, method=method)
    total = m.weight
    vx = _side_values(g, m)
    # the digraph answers removals on the X side; swap the parts for Y
    gt = WeightedBipartiteGraph(g.ny, g.nx)
    gt.ex, gt.ey, gt.ew = g.ey, g.ex, g.ew
    mt = Matching(m.mate_y, m.mate_x, total)
    vy = _side_values(gt, mt)
    return CavityResult(total, vx, vy, m)


def _side_values(g: WeightedBipartiteGraph, m: Matching) -> np.ndarray:
    L = longest_path_weights(build_cavity_digraph(g, m))
    vals = np.full(g.nx, m.weight, dtype=np.int64)
    mx = m.mate_x >= 0
    vals[mx] = m.weight + L[: g.nx][mx]
    return vals


# ---------------------------------------------------------------------------
# Edge-list I/O
# ---------------------------------------------------------------------------

def read_edge_list(text: str) -> WeightedBipartiteGraph:
    """Parse ``nx ny m`` followed by ``m`` lines ``xi yi w`` (1-based)."""
    tokens = text.split()
    if len(tokens) < 3:
        raise ValueError("edge list needs a header 'nx ny m'")
    try:
        nums = [int(tok) for tok in tokens]
    except ValueError as exc:
        raise ValueError(f"edge list must contain integers only: {exc}") from None
    nx, ny, m = nums[:3]
    body = nums[3:]
    if len(body) != 3 * m:
        raise ValueError(f"expected {m} edges, found {len(body) / 3:g}")
    edges = [(body[i] - 1, body[i + 1] - 1, body[i + 2]) for i in range(0, len(body), 3)]
    return WeightedBipartiteGraph(nx, ny, edges)


def write_edge_list(g: WeightedBipartiteGraph) -> str:
    buf = io.StringIO()
    buf.write(f"{g.nx} {g.ny} {g.m}\n")
    for x, y, w in g.edges():
        buf.write(f"{x + 1} {y + 1} {w}\n")
    return buf.getvalue()


def format_cavity(res: CavityResult) -> str:
    """Lines ``side index value`` with 1-based indices."""
    lines = [f"x {i + 1} {v}" for i, v in enumerate(res.values_x.tolist())]
    lines += [f"y {j + 1} {v}" for j, v in enumerate(res.values_y.tolist())]
    return "\n".join(lines) + ("\n" if lines else "")
