import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agreetree.compression import ORDINARY, ShrunkTree, compress_two, plain_annotated
from agreetree.oracle import (
    naive_mast_unrooted,
    random_mixed_tree,
    random_rooted_tree,
    random_unrooted_tree,
    rooting_sweep_mast,
)
from agreetree.rooted import mast_rooted, mast_table, subtree_scores
from agreetree.tree import (
    Tree,
    find_separator,
    insert_dummy_nodes,
    parse_newick,
    root_at,
    subtree_at,
)
from agreetree.unrooted import (
    RecursionStats,
    build_cavity_arrays,
    mast_mixed,
    mast_unrooted,
    mast_wx,
    new_subproblems,
    recursion_context,
)
from agreetree.verification import case_mixed, case_unrooted


def unrooted_pair(seed, n, deg=3):
    rng = np.random.default_rng(seed)
    labels = list(range(n))
    return random_unrooted_tree(rng, labels, deg), random_unrooted_tree(rng, labels, deg)


def plain_x(u):
    return ShrunkTree(u, [0] * u.n, {}, list(range(u.n)))


class TestMastUnrooted:
    def test_identical(self, rng):
        u = random_unrooted_tree(rng, range(20))
        assert mast_unrooted(u, u) == 20

    def test_stars(self):
        a = parse_newick("(a,b,c);")
        b = parse_newick("(a,b,d);")
        assert mast_unrooted(a, b) == 2

    def test_rejects_rooted_and_mixed(self):
        with pytest.raises(ValueError):
            mast_unrooted(parse_newick("(a,b,c);", rooted=True), parse_newick("(a,b,c);"))
        with pytest.raises(ValueError):
            mast_unrooted(parse_newick("(a,>(b,c),d);"), parse_newick("(a,b,c);"))

    def test_unknown_mode(self):
        u = parse_newick("(a,b,c);")
        with pytest.raises(ValueError):
            mast_unrooted(u, u, mode="quick")

    @pytest.mark.parametrize("mode", ["fast", "reference", "paranoid"])
    def test_modes_agree(self, mode):
        u1, u2 = unrooted_pair(4, 18, None)
        assert mast_unrooted(u1, u2, mode=mode) == naive_mast_unrooted(u1, u2)

    @settings(max_examples=25)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_random_against_sweep(self, seed):
        cx, counters = case_unrooted(np.random.default_rng(seed), 40)
        assert cx is None, cx

    @settings(max_examples=25)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_paranoid(self, seed):
        cx, counters = case_unrooted(np.random.default_rng(seed), 20, mode="paranoid")
        assert cx is None, cx

    def test_size_discipline_counters(self):
        u1, u2 = unrooted_pair(11, 120)
        st_ = RecursionStats()
        mast_unrooted(u1, u2, stats=st_)
        assert st_.spawns > 0 and not st_.violations
        assert st_.bound_violations == 0


class TestMastWX:
    def test_tiny_x(self):
        t = parse_newick("((a,b),c);", rooted=True)
        x = plain_x(Tree([[1], [0]], ["a", "b"]))
        assert mast_wx(plain_annotated(t), x) == 0

    @given(st.integers(0, 2 ** 32 - 1))
    def test_plain_pair(self, seed):
        u1, u2 = unrooted_pair(seed, 14, None)
        t = root_at(u1, find_separator(u1))
        want = max(mast_rooted(t, root_at(u2, v)) for v in u2.internal_nodes())
        assert mast_wx(plain_annotated(t), plain_x(u2)) == want


class TestNewSubproblems:
    def context(self, seed, n=40):
        u1, u2 = unrooted_pair(seed, n)
        t = root_at(u1, find_separator(u1))
        ctx = recursion_context(t, u2)
        return t, u2, ctx

    def test_degree_two_separator(self):
        u1, u2 = unrooted_pair(2, 12)
        d = insert_dummy_nodes(u2)
        t = root_at(u1, find_separator(u1))
        y = next(v for v in d.dummy if all(len(d.adj[w]) > 1 for w in d.adj[v]))
        subs = new_subproblems(plain_annotated(t), plain_x(d), y, recursion_context(t, d))
        assert len(subs) == 2
        j = [s.x.atomic_labels() for s in subs]
        assert not j[0] & j[1] and j[0] | j[1] == d.leaf_labels()

    @given(st.integers(0, 2 ** 32 - 1))
    def test_label_partition(self, seed):
        t, u2, ctx = self.context(seed)
        x = plain_x(u2)
        y = find_separator(u2)
        subs = new_subproblems(plain_annotated(t), x, y, ctx)
        seen = set()
        for sp in subs:
            labs = sp.x.atomic_labels()
            assert not labs & seen
            seen |= labs
            assert len(sp.x.shrunk()) == 1
        assert seen <= u2.leaf_labels()

    @given(st.integers(0, 2 ** 32 - 1))
    def test_second_level_shrunk_counts(self, seed):
        t, u2, ctx = self.context(seed)
        subs = new_subproblems(plain_annotated(t), plain_x(u2), find_separator(u2), ctx)
        sp = max(subs, key=lambda s: s.size)
        x = sp.x
        (g,) = x.shrunk().values()
        y = find_separator(x.tree)
        if len(x.tree.adj[y]) < 2:
            return
        subs2 = new_subproblems(sp.w, x, y, ctx)
        two = [s for s in subs2 if len(s.x.shrunk()) == 2]
        assert len(two) <= 1
        assert all(len(s.x.shrunk()) in (1, 2) for s in subs2)


class TestCavityArrays:
    @given(st.integers(0, 2 ** 32 - 1))
    def test_against_explicit_graphs(self, seed):
        from scipy.optimize import linear_sum_assignment

        u1, u2 = unrooted_pair(seed, 16, None)
        t = root_at(u1, find_separator(u1))
        w = plain_annotated(t)
        y = find_separator(u2)
        xy = plain_x(u2).rooted_at(y)
        tab = mast_table(w, xy)
        kids = xy.tree.children[xy.tree.root]
        K = tab.table[:, kids].astype(np.int64)
        cav = build_cavity_arrays(w, K)
        for z in range(w.n):
            chs = w.children[z]
            if not chs or w.kind[z] != ORDINARY:
                continue
            assert len(cav.arrays[z].distinct_values()) <= len(chs) + 1
            for i in range(K.shape[1]):
                sub = np.delete(K[chs], i, axis=1)
                r, c = linear_sum_assignment(sub, maximize=True)
                assert cav.arrays[z][i] == int(sub[r, c].sum())


class TestTwoSubtreeSymmetry:
    @given(st.integers(0, 2 ** 32 - 1))
    def test_swap_slots(self, seed):
        rng = np.random.default_rng(seed)
        t = random_rooted_tree(rng, range(12), None)
        t2 = random_rooted_tree(rng, range(12), None)
        a, b = t2.children[t2.root][:2]
        r1, r2 = subtree_at(t2, a), subtree_at(t2, b)
        oracle = lambda r: subtree_scores(t, r)  # noqa: E731
        w12 = compress_two(t, r1, r2, oracle)
        w21 = compress_two(t, r2, r1, oracle)

        def rows(w, swap):
            out = []
            for v in range(w.n):
                a1, a2 = int(w.alpha1[v]), int(w.alpha2[v])
                b12, b21 = int(w.beta12[v]), int(w.beta21[v])
                if swap:
                    a1, a2, b12, b21 = a2, a1, b21, b12
                out.append((w.kind[v], a1, a2, int(w.alphap[v]), int(w.beta[v]), b12, b21))
            return sorted(out)

        assert rows(w12, False) == rows(w21, True)


class TestMixed:
    def test_undirected_equals_unrooted(self, rng):
        u1 = random_unrooted_tree(rng, range(15))
        u2 = random_unrooted_tree(rng, range(15))
        assert mast_mixed(u1, u2) == mast_unrooted(u1, u2)

    def test_all_away_from_one_node(self, rng):
        def orient(u):
            r = u.internal_nodes()[0]
            arcs, seen, stack = [], {r}, [r]
            while stack:
                v = stack.pop()
                for w in u.adj[v]:
                    if w not in seen:
                        seen.add(w)
                        arcs.append((v, w))
                        stack.append(w)
            return Tree(u.adj, u.labels, arcs=arcs), r

        m1, r1 = orient(random_unrooted_tree(rng, range(12)))
        m2, r2 = orient(random_unrooted_tree(rng, range(12)))
        got = mast_mixed(m1, m2)
        assert got == rooting_sweep_mast(m1, m2)
        assert got >= mast_rooted(root_at(m1, r1), root_at(m2, r2))

    @settings(max_examples=25)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_random_against_sweep(self, seed):
        cx, _ = case_mixed(np.random.default_rng(seed), 25)
        assert cx is None, cx

    @settings(max_examples=15)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_paranoid(self, seed):
        cx, _ = case_mixed(np.random.default_rng(seed), 18, mode="paranoid")
        assert cx is None, cx

    def test_rejects_rooted(self):
        with pytest.raises(ValueError):
            mast_mixed(parse_newick("(a,b,c);", rooted=True), parse_newick("(a,b,c);"))

    def test_random_mixed_generator_has_arcs(self, rng):
        m = random_mixed_tree(rng, range(20), 0.5)
        assert m.arcs
