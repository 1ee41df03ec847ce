import numpy as np
from hypothesis import given, strategies as st

from agreetree.compression import COMP_LEAF, AUX_INTERNAL, AUX_LEAF, AnnotatedTree, ShrunkTree, plain_annotated
from agreetree.oracle import brute_mast_rooted, enumerate_mwm, random_rooted_tree, validate_agreement
from agreetree.rooted import (
    MastStats,
    mast_annotated,
    mast_rooted,
    mast_table,
    r_mast_internal,
    rooted_witness,
)
from agreetree.tree import Tree, induced_subtree, isomorphic, parse_newick


def pair(seed, k=10, deg=2):
    rng = np.random.default_rng(seed)
    labels = list(range(k))
    t1 = random_rooted_tree(rng, labels, deg)
    t2 = random_rooted_tree(rng, [int(x) for x in rng.permutation(labels)[: max(1, k - 2)]], deg)
    return t1, t2


class TestMastRooted:
    def test_identical(self, rng):
        t = random_rooted_tree(rng, range(15), None)
        assert mast_rooted(t, t) == 15

    def test_disjoint(self):
        a = parse_newick("((a,b),c);", rooted=True)
        b = parse_newick("((x,y),z);", rooted=True)
        assert mast_rooted(a, b) == 0

    def test_small_conflict(self):
        a = parse_newick("(a,(b,c));", rooted=True)
        b = parse_newick("((a,b),c);", rooted=True)
        assert mast_rooted(a, b) == 2

    def test_empty(self):
        assert mast_rooted(Tree.empty(), parse_newick("a;", rooted=True)) == 0

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 10), st.sampled_from([2, 3, None]))
    def test_matches_brute(self, seed, k, deg):
        t1, t2 = pair(seed, k, deg)
        assert mast_rooted(t1, t2) == brute_mast_rooted(t1, t2)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_symmetric(self, seed):
        t1, t2 = pair(seed, 12, None)
        assert mast_rooted(t1, t2) == mast_rooted(t2, t1)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_monotone_under_restriction(self, seed):
        t1, t2 = pair(seed, 12, None)
        keep = sorted(t1.leaf_labels())[::2]
        assert mast_rooted(induced_subtree(t1, keep), t2) <= mast_rooted(t1, t2)

    def test_counters(self, rng):
        t1, t2 = pair(5, 20)
        st_ = MastStats()
        mast_rooted(t1, t2, st_)
        assert st_.calls == 1 and st_.node_pairs > 0


class TestAnnotated:
    def test_gamma_unusable(self):
        t1 = parse_newick("((a,b),(c,d));", rooted=True)
        t2 = parse_newick("((a,b),(c,x));", rooted=True)
        w1 = plain_annotated(t1)
        w1.form = 1
        g = t2.leaf_of("x")
        labels = list(t2.labels)
        labels[g] = None
        shr = ShrunkTree(Tree(t2.adj, labels, root=t2.root), [int(v == g) for v in range(t2.n)])
        assert mast_annotated(w1, shr) == mast_rooted(t1, parse_newick("((a,b),c);", rooted=True))

    def test_single_compressed_leaf(self):
        w = AnnotatedTree(1)
        w.add(-1, COMP_LEAF, case=1)
        w.freeze()
        w.alpha1[0] = 4
        x = ShrunkTree(Tree([[]], [None], root=0), [1])
        assert mast_annotated(w, x) == 4


class TestRMastInternal:
    def test_two_leaf_children(self):
        t = parse_newick("(a,b);", rooted=True)
        tab = mast_table(plain_annotated(t), t)
        assert r_mast_internal(tab, 0, t.root) == 2

    def test_aux_internal_is_zero(self):
        w = AnnotatedTree(2)
        r = w.add(-1, AUX_INTERNAL)
        w.add(r, AUX_LEAF)
        w.add(r, AUX_LEAF)
        w.freeze()
        t = parse_newick("(a,b);", rooted=True)
        assert r_mast_internal(mast_table(w, t), 0, t.root) == 0

    @given(st.integers(0, 2 ** 32 - 1))
    def test_against_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        t1 = random_rooted_tree(rng, range(14), None)
        t2 = random_rooted_tree(rng, range(14), None)
        w1 = plain_annotated(t1)
        tab = mast_table(w1, t2)
        for u in range(w1.n):
            for v in range(t2.n):
                k1, k2 = w1.children[u], t2.children[v]
                if k1 and k2 and len(k1) <= 5 and len(k2) <= 5:
                    want = enumerate_mwm(tab.table[np.ix_(k1, k2)])
                    assert r_mast_internal(tab, u, v) == want


class TestWitness:
    def test_identical(self):
        t = parse_newick("((a,b),(c,(d,e)));", rooted=True)
        size, wit = rooted_witness(t, t)
        assert size == 5 and isomorphic(wit, t)

    def test_disjoint(self):
        a = parse_newick("(a,b);", rooted=True)
        size, wit = rooted_witness(a, parse_newick("(x,y);", rooted=True))
        assert size == 0 and wit.n == 0

    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 40))
    def test_validated(self, seed, k):
        t1, t2 = pair(seed, k, None)
        size, wit = rooted_witness(t1, t2)
        assert len(wit.leaf_labels()) == size == mast_rooted(t1, t2)
        assert validate_agreement(wit, t1, t2)
