import numpy as np
import pytest
from hypothesis import given, strategies as st

from agreetree.oracle import random_rooted_tree, random_unrooted_tree
from agreetree.tree import (
    NewickError,
    Tree,
    find_separator,
    induced_subtree,
    insert_dummy_nodes,
    isomorphic,
    parse_newick,
    preorder_index,
    root_at,
    serialize_newick,
    components_without,
)


def path_tree(labels, arcs=()):
    n = len(labels)
    adj = [[] for _ in range(n)]
    for i in range(n - 1):
        adj[i].append(i + 1)
        adj[i + 1].append(i)
    return Tree(adj, list(labels), arcs=arcs)


class TestParse:
    def test_small_unrooted(self):
        t = parse_newick("(a,(b,c));")
        assert t.leaf_labels() == {"a", "b", "c"}
        assert len(t.internal_nodes()) == 2
        assert t.root is None

    def test_single_leaf(self):
        t = parse_newick("a;")
        assert t.n == 1 and t.labels == ["a"]

    def test_duplicate_label(self):
        with pytest.raises(NewickError):
            parse_newick("(a,(a,b));")

    @pytest.mark.parametrize("text", ["(a,b", "(a,b));", "", "(a,,b);x"])
    def test_malformed(self, text):
        with pytest.raises(NewickError):
            parse_newick(text)

    def test_lengths_and_comments_ignored(self):
        t = parse_newick("((a:1.5,b:2)x:0.1,[note]c);", rooted=True)
        assert t.leaf_labels() == {"a", "b", "c"}
        assert t.root is not None

    def test_directed_marks(self):
        t = parse_newick("(a,>(b,c),<d);")
        assert len(t.arcs) == 2


class TestSerialize:
    def test_leaf(self):
        assert serialize_newick(parse_newick("a;")) == "a;"

    def test_cherry(self):
        assert serialize_newick(parse_newick("(a,b);", rooted=True)) == "(a,b);"

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for i in range(1000):
            n = int(rng.integers(3, 201))
            labels = [f"t{k}" for k in range(n)]
            if i % 2:
                t = random_unrooted_tree(rng, labels, [3, None][i % 4 // 2])
                back = parse_newick(serialize_newick(t))
            else:
                t = random_rooted_tree(rng, labels, [2, None][i % 4 // 2])
                back = parse_newick(serialize_newick(t), rooted=True)
            assert isomorphic(t, back)


class TestRootAt:
    def test_path_center(self):
        t = root_at(path_tree(["a", None, "c"]), 1)
        assert t.root is not None
        assert sorted(t.labels[c] for c in t.children[t.root]) == ["a", "c"]

    def test_keeps_all_nodes(self, rng):
        u = random_unrooted_tree(rng, range(12))
        for v in u.internal_nodes():
            assert root_at(u, v).n == u.n

    def test_mixed_drops_inconsistent(self):
        # a -> b - c: from c the arc a->b points back, so a is dropped
        t = path_tree(["a", "b", "c"], arcs=[(0, 1)])
        r = root_at(t, 2)
        assert "a" not in r.labels


class TestInduced:
    def test_lca_closure(self):
        t = parse_newick("((a,b),c);", rooted=True)
        s = induced_subtree(t, {"b", "c"})
        assert sorted(s.labels[c] for c in s.children[s.root]) == ["b", "c"]

    def test_all_labels(self):
        t = parse_newick("(((a,b)),c);", rooted=True)
        s = induced_subtree(t, {"a", "b", "c"})
        assert isomorphic(s, parse_newick("((a,b),c);", rooted=True))

    def test_single(self):
        t = parse_newick("((a,b),c);", rooted=True)
        s = induced_subtree(t, {"a"})
        assert s.n == 1 and s.labels == ["a"]


class TestSeparator:
    def test_path(self):
        t = path_tree(["a", None, None, None, "e"])
        assert find_separator(t) == 2

    def test_star(self):
        adj = [[1, 2, 3, 4], [0], [0], [0], [0]]
        t = Tree(adj, [None, "a", "b", "c", "d"])
        assert find_separator(t) == 0

    @given(st.integers(3, 500), st.integers(0, 2 ** 32 - 1), st.sampled_from([3, None]))
    def test_component_bound(self, n, seed, deg):
        t = random_unrooted_tree(np.random.default_rng(seed), range(n), deg)
        x = find_separator(t)
        for _, comp in components_without(t, x):
            assert len(comp) <= t.n // 2


class TestDummies:
    def test_single_edge(self):
        t = insert_dummy_nodes(Tree([[1], [0]], ["a", "b"]))
        assert t.n == 3
        d = next(iter(t.dummy))
        assert sorted(t.adj[d]) == [0, 1]

    @given(st.integers(1, 60), st.integers(0, 2 ** 32 - 1))
    def test_size_and_leaves(self, n, seed):
        t = random_unrooted_tree(np.random.default_rng(seed), range(n))
        d = insert_dummy_nodes(t)
        assert d.n == 2 * t.n - 1
        assert d.leaf_labels() == t.leaf_labels()


class TestPreorder:
    def test_root_and_leaves(self, rng):
        t = random_rooted_tree(rng, range(20), None)
        pre = preorder_index(t)
        assert pre.number[t.root] == 1
        assert pre.desc_count[t.root] == t.n - 1
        for v in t.leaves():
            assert pre.desc_count[v] == 0

    @given(st.integers(1, 200), st.integers(0, 2 ** 32 - 1))
    def test_intervals(self, n, seed):
        t = random_rooted_tree(np.random.default_rng(seed), range(n), None, unary=0.1)
        pre = preorder_index(t)
        for v in range(t.n):
            below = [v]
            for x in below:
                below.extend(t.children[x])
            nums = sorted(pre.number[z] for z in below)
            assert nums == list(range(pre.number[v], pre.number[v] + pre.desc_count[v] + 1))
