import numpy as np
import pytest
from hypothesis import given, strategies as st

from agreetree.matching import (
    PositiveCycleError,
    WeightedBipartiteGraph,
    all_cavity,
    build_cavity_digraph,
    format_cavity,
    longest_path_weights,
    max_weight_matching,
    read_edge_list,
    write_edge_list,
)
from agreetree.oracle import enumerate_mwm, naive_all_cavity, random_bipartite

TRIANGLE = [(0, 0, 5), (0, 1, 2), (1, 0, 3)]


@st.composite
def graphs(draw, max_side=6, wmax=50):
    nx = draw(st.integers(0, max_side))
    ny = draw(st.integers(0, max_side))
    cells = draw(st.sets(st.tuples(st.integers(0, max(nx - 1, 0)), st.integers(0, max(ny - 1, 0))),
                         max_size=nx * ny))
    edges = [(x, y, draw(st.integers(1, wmax))) for x, y in sorted(cells) if x < nx and y < ny]
    return WeightedBipartiteGraph(nx, ny, edges)


def brute_longest(d):
    """Heaviest simple path from every node to t by exhaustive search."""
    out = {}
    succ = {}
    for a, b, w in d.arcs():
        succ.setdefault(a, []).append((b, w))

    def best(v, seen):
        if v == d.t:
            return 0
        vals = []
        for b, w in succ.get(v, []):
            if b not in seen:
                rest = best(b, seen | {b})
                if rest is not None:
                    vals.append(w + rest)
        return max(vals) if vals else None

    for v in range(d.n_nodes):
        out[v] = best(v, {v})
    return out


class TestMatching:
    @pytest.mark.parametrize("method", ["scipy", "ssp"])
    def test_triangle(self, method):
        assert max_weight_matching(WeightedBipartiteGraph(2, 2, TRIANGLE), method).weight == 5

    @pytest.mark.parametrize("method", ["scipy", "ssp"])
    def test_single_edge(self, method):
        assert max_weight_matching(WeightedBipartiteGraph(1, 1, [(0, 0, 7)]), method).weight == 7

    @pytest.mark.parametrize("method", ["scipy", "ssp"])
    def test_no_edges(self, method):
        assert max_weight_matching(WeightedBipartiteGraph(3, 2), method).weight == 0

    @given(graphs())
    def test_engines_agree_with_enumeration(self, g):
        want = enumerate_mwm(g.dense())
        for method in ("scipy", "ssp"):
            m = max_weight_matching(g, method)
            assert m.weight == want
            assert sum(g.dense()[x, y] for x, y in m.pairs()) == want


class TestDigraph:
    def test_single_edge_arcs(self):
        g = WeightedBipartiteGraph(1, 1, [(0, 0, 7)])
        d = build_cavity_digraph(g, max_weight_matching(g))
        assert sorted(d.arcs()) == [(0, 1, -7), (1, 2, 0)]

    def test_unmatched_x(self):
        g = WeightedBipartiteGraph(1, 0)
        d = build_cavity_digraph(g, max_weight_matching(g))
        assert d.arcs() == [(0, 1, 0)]

    def test_single_edge_longest(self):
        g = WeightedBipartiteGraph(1, 1, [(0, 0, 7)])
        L = longest_path_weights(build_cavity_digraph(g, max_weight_matching(g)))
        assert L.tolist() == [-7, 0, 0]

    @given(graphs(max_side=5))
    def test_shape(self, g):
        m = max_weight_matching(g)
        d = build_cavity_digraph(g, m)
        assert int((d.weight < 0).sum()) == len(m)
        assert len(d.arcs()) <= g.nx + g.ny + g.m

    @given(graphs(max_side=4, wmax=9))
    def test_longest_matches_path_enumeration(self, g):
        d = build_cavity_digraph(g, max_weight_matching(g))
        L = longest_path_weights(d)
        want = brute_longest(d)
        for v in range(d.n_nodes):
            if want[v] is None:
                assert L[v] < -10 ** 12
            else:
                assert L[v] == want[v]

    def test_positive_cycle_detected(self):
        # a matching that is not optimal leaves an improving cycle in D
        from agreetree.matching import Matching

        g = WeightedBipartiteGraph(2, 2, [(0, 0, 1), (1, 1, 1), (0, 1, 5), (1, 0, 5)])
        bad = Matching(np.array([0, 1]), np.array([0, 1]), 2)
        with pytest.raises(PositiveCycleError):
            longest_path_weights(build_cavity_digraph(g, bad))


class TestAllCavity:
    def test_triangle_values(self):
        res = all_cavity(WeightedBipartiteGraph(2, 2, TRIANGLE))
        assert res.mwm == 5
        assert res.values_x.tolist() == [3, 5]
        assert res.values_y.tolist() == [2, 5]

    def test_single_edge(self):
        res = all_cavity(WeightedBipartiteGraph(1, 1, [(0, 0, 7)]))
        assert (res.mwm, res.values_x.tolist(), res.values_y.tolist()) == (7, [0], [0])

    def test_unmatched_node_keeps_optimum(self):
        g = WeightedBipartiteGraph(3, 2, [(0, 0, 4), (1, 1, 6), (2, 1, 1)])
        res = all_cavity(g)
        assert res.matching.mate_x[2] < 0
        assert res.values_x[2] == res.mwm

    def test_empty(self):
        res = all_cavity(WeightedBipartiteGraph(0, 0))
        assert res.mwm == 0 and res.values_x.size == 0 and res.values_y.size == 0
        res = all_cavity(WeightedBipartiteGraph(3, 2))
        assert res.values_x.tolist() == [0, 0, 0] and res.values_y.tolist() == [0, 0]

    @given(graphs())
    def test_matches_naive(self, g):
        res = all_cavity(g)
        total, vx, vy = naive_all_cavity(g)
        assert (res.mwm, res.values_x.tolist(), res.values_y.tolist()) == (total, vx, vy)

    @given(graphs())
    def test_deletion_never_helps(self, g):
        res = all_cavity(g)
        assert (res.values_x <= res.mwm).all() and (res.values_y <= res.mwm).all()
        assert (res.mwm - res.values_x <= g.max_weight).all()

    def test_large_sparse_ssp_agrees(self):
        rng = np.random.default_rng(3)
        g = random_bipartite(rng, 40, 35, 0.1, 50)
        assert all_cavity(g, "ssp").values_x.tolist() == all_cavity(g).values_x.tolist()


class TestEdgeList:
    def test_round_trip(self):
        g = WeightedBipartiteGraph(2, 2, TRIANGLE)
        back = read_edge_list(write_edge_list(g))
        assert sorted(back.edges()) == sorted(g.edges())

    @pytest.mark.parametrize("text", ["", "1 1", "1 1 1\n1 1", "a b c", "1 1 1\n2 1 3\n"])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            read_edge_list(text)

    def test_format(self):
        out = format_cavity(all_cavity(WeightedBipartiteGraph(1, 1, [(0, 0, 7)])))
        assert out == "x 1 0\ny 1 0\n"
