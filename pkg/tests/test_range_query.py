import numpy as np
import pytest
from hypothesis import given, strategies as st

from agreetree.rangequery import (
    NEG,
    SparseArray,
    build_attachment_index,
    build_subtree_index,
    query_subtree_max,
    range_max,
)
from agreetree.tree import Tree, preorder_index
from agreetree.verification import random_index_instance


def random_tree(rng, h):
    parent = [-1] + [int(rng.integers(0, v)) for v in range(1, h)]
    return Tree.from_parents(parent, [None] * h)


class TestSparseArray:
    def test_default_and_overrides(self):
        a = SparseArray(5, 2)
        a[3] = 9
        a[1] = 2
        assert a.to_list() == [2, 2, 2, 9, 2]
        assert a.overrides() == [(3, 9)]
        assert a.distinct_values() == {2, 9}

    def test_reset_is_complete(self):
        a = SparseArray(4, 0)
        a[0] = 5
        a.reset(1)
        assert a.to_list() == [1, 1, 1, 1] and a.overrides() == []

    def test_bounds(self):
        with pytest.raises(IndexError):
            SparseArray(2)[2] = 1

    @given(st.lists(st.integers(-5, 5), max_size=30))
    def test_from_values(self, vals):
        a = SparseArray.from_values(vals)
        assert a.to_list() == vals


class TestRangeMax:
    def test_example(self):
        assert range_max([3, 1, 4, 1, 5]).query(2, 4) == 4

    @given(st.lists(st.integers(-100, 100), min_size=1, max_size=60), st.data())
    def test_against_scan(self, seq, data):
        r = range_max(seq)
        x = data.draw(st.integers(1, len(seq)))
        y = data.draw(st.integers(x, len(seq)))
        assert r.query(x, y) == max(seq[x - 1:y])
        assert r.query(x, x) == seq[x - 1]
        assert r.query(1, len(seq)) == max(seq)


class TestSubtreeIndex:
    def test_all_default(self, rng):
        t = random_tree(rng, 10)
        arrays = [SparseArray(4, int(rng.integers(0, 9))) for _ in range(t.n)]
        idx = build_subtree_index(arrays, preorder_index(t))
        assert all(not g for g in idx.gamma)
        pre = preorder_index(t)
        for v in range(t.n):
            p = pre.number[v]
            assert idx.query(v, 2) == idx.default_rmq.query(p, p + pre.desc_count[v])

    def test_single_override(self):
        # a path: node ids coincide with preorder rows minus one
        t = Tree.from_parents([-1, 0, 1, 2, 3, 4], [None] * 6)
        arrays = [SparseArray(5, 0) for _ in range(6)]
        arrays[4][3] = 9
        pre = preorder_index(t)
        idx = build_subtree_index(arrays, pre)
        assert idx.gamma[3] == [pre.number[4]] == [5]
        assert idx.query(0, 3) == 9 and idx.query(5, 3) == 0

    def test_leaf_and_root(self, rng):
        t, dense, arrays, _ = random_index_instance(rng, 40, 10)
        idx = build_subtree_index(arrays, preorder_index(t))
        for i in range(dense.shape[1]):
            assert query_subtree_max(idx, t.root, i) == dense[:, i].max()
            for v in t.leaves():
                assert query_subtree_max(idx, v, i) == dense[v, i]

    @given(st.integers(0, 2 ** 32 - 1))
    def test_against_scan(self, seed):
        t, dense, arrays, deg = random_index_instance(np.random.default_rng(seed), 30, 12)
        pre = preorder_index(t)
        idx = build_subtree_index(arrays, pre)
        for v in range(t.n):
            rows = [pre.node_at[r] for r in range(pre.number[v], pre.number[v] + pre.desc_count[v] + 1)]
            want = dense[rows].max(axis=0)
            assert [query_subtree_max(idx, v, i) for i in range(dense.shape[1])] == want.tolist()

    @given(st.integers(0, 2 ** 32 - 1))
    def test_distinct_value_bound(self, seed):
        t, dense, arrays, deg = random_index_instance(np.random.default_rng(seed), 30, 20)
        for z in range(t.n):
            assert len(arrays[z].distinct_values()) <= deg[z] + 1

    def test_mixed_dimensions_rejected(self):
        t = Tree.from_parents([-1, 0], [None, None])
        with pytest.raises(ValueError):
            build_subtree_index([SparseArray(2), SparseArray(3)], preorder_index(t))


class TestAttachment:
    def test_interval_example(self):
        t = Tree.from_parents([-1, 0, 0, 0], [None] * 4)
        idx = build_attachment_index(t, [0, 2, 9, 4])
        assert idx.interval_query(0, 1, 2) == 9
        assert idx.interval_query(0, 1, 3) == 9 == idx.children_max(0)
        assert idx.interval_query(0, 3, 3) == 4

    def test_single_node_path(self):
        t = Tree.from_parents([-1, 0, 0, 1], [None] * 4)
        idx = build_attachment_index(t, [0, 5, 7, 3])
        assert idx.path_query([0]) == 7
        assert idx.path_query(1, 1) == 3

    @given(st.integers(0, 2 ** 32 - 1))
    def test_path_against_scan(self, seed):
        rng = np.random.default_rng(seed)
        t = random_tree(rng, int(rng.integers(1, 40)))
        score = rng.integers(0, 50, size=t.n).tolist()
        idx = build_attachment_index(t, score)
        bottom = int(rng.integers(0, t.n))
        path = [bottom]
        while t.parent[path[-1]] >= 0 and rng.random() < 0.7:
            path.append(t.parent[path[-1]])
        on = set(path)
        hang = [score[c] for v in path for c in t.children[v] if c not in on]
        assert idx.path_query(path[-1], bottom) == (max(hang) if hang else NEG)
        below = [score[c] for v in path[1:] for c in t.children[v] if c not in on]
        assert idx.hanging_query(path[-1], bottom) == (max(below) if below else NEG)
