import inspect
import re

import numpy as np
import pytest

from agreetree import matching, oracle, rangequery, rooted, unrooted
from agreetree.matching import WeightedBipartiteGraph
from agreetree.oracle import (
    BudgetExceeded,
    OracleBudget,
    brute_mast_rooted,
    naive_all_cavity,
    naive_mast_unrooted,
    random_rooted_tree,
    random_unrooted_tree,
    rooting_sweep_mast,
    validate_agreement,
)
from agreetree.tree import Tree, parse_newick
from agreetree.verification import run_suite


class TestBruteRooted:
    def test_identical(self, rng):
        t = random_rooted_tree(rng, range(9), None)
        assert brute_mast_rooted(t, t) == 9

    def test_small_conflict(self):
        a = parse_newick("(a,(b,c));", rooted=True)
        b = parse_newick("((a,b),c);", rooted=True)
        assert brute_mast_rooted(a, b) == 2

    def test_single_shared(self):
        a = parse_newick("(a,(b,c));", rooted=True)
        b = parse_newick("((a,x),y);", rooted=True)
        assert brute_mast_rooted(a, b) == 1

    def test_budget(self, rng):
        t = random_rooted_tree(rng, range(30))
        with pytest.raises(BudgetExceeded):
            brute_mast_rooted(t, t, OracleBudget(max_subsets=1000))


class TestNaiveUnrooted:
    def test_two_leaf_trees(self):
        a = Tree([[1], [0]], ["a", "b"])
        b = Tree([[1], [0]], ["b", "a"])
        assert naive_mast_unrooted(a, b) == 2

    def test_stars(self):
        assert naive_mast_unrooted(parse_newick("(a,b,c);"), parse_newick("(a,b,d);")) == 2

    def test_matches_literal_sweep(self):
        rng = np.random.default_rng(8)
        for i in range(60):
            n = int(rng.integers(1, 14))
            a = random_unrooted_tree(rng, range(n), [3, None][i % 2])
            b = random_unrooted_tree(rng, range(n), [3, None][i % 2])
            assert naive_mast_unrooted(a, b) == rooting_sweep_mast(a, b)

    def test_budget(self, rng):
        u = random_unrooted_tree(rng, range(50))
        with pytest.raises(BudgetExceeded):
            naive_mast_unrooted(u, u, OracleBudget(max_nodes=20))


class TestNaiveCavity:
    def test_isolated_node(self):
        g = WeightedBipartiteGraph(3, 2, [(0, 0, 4), (1, 1, 6)])
        total, vx, vy = naive_all_cavity(g)
        assert vx[2] == total == 10

    def test_empty(self):
        assert naive_all_cavity(WeightedBipartiteGraph(2, 3)) == (0, [0, 0], [0, 0, 0])

    def test_enumeration_and_solver_agree(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            g = oracle.random_bipartite(rng, 5, 6, 0.5, 20)
            assert naive_all_cavity(g, enumerate_small=True) == naive_all_cavity(g, enumerate_small=False)


class TestValidator:
    def test_rejects_wrong_shape(self):
        t1 = parse_newick("((a,b),c);", rooted=True)
        t2 = parse_newick("((a,b),c);", rooted=True)
        assert validate_agreement(parse_newick("((a,b),c);", rooted=True), t1, t2)
        assert not validate_agreement(parse_newick("((a,c),b);", rooted=True), t1, t2)

    def test_rejects_foreign_label(self):
        t = parse_newick("((a,b),c);", rooted=True)
        assert not validate_agreement(parse_newick("(a,z);", rooted=True), t, t)


def test_oracles_do_not_call_fast_paths():
    fast_names = {"mast_rooted", "mast_table", "mast_annotated", "all_cavity", "mast_unrooted",
                  "mast_mixed", "max_weight_matching", "build_subtree_index"}
    for fn in (brute_mast_rooted, naive_mast_unrooted, naive_all_cavity, validate_agreement,
               oracle.enumerate_mwm, oracle.alternating_paths):
        src = inspect.getsource(fn)
        assert not any(re.search(rf"\b{name}\(", src) for name in fast_names), fn.__name__


# ---------------------------------------------------------------------------
# Mutation smoke tests: a seeded bug in a fast path must be caught
# ---------------------------------------------------------------------------

@pytest.fixture
def serial(monkeypatch):
    monkeypatch.setenv("AGREETREE_THREADS", "1")


def test_mutant_cavity_is_caught(monkeypatch, serial):
    real = matching.all_cavity

    def broken(g, method="scipy"):
        res = real(g, method)
        if g.nx:
            res.values_x = res.values_x.copy()
            res.values_x[-1] += 1
        return res

    monkeypatch.setattr(matching, "all_cavity", broken)
    res = run_suite("cavity", 0, 50, 12)
    assert res.failures and res.counterexample["why"].startswith("all_cavity")


def test_mutant_rooted_is_caught(monkeypatch, serial):
    real = rooted.rooted_witness

    def broken(t1, t2, stats=None):
        value, wit = real(t1, t2, stats)
        return (value - 1 if value > 2 else value), wit

    monkeypatch.setattr(rooted, "rooted_witness", broken)
    assert not run_suite("rooted", 0, 50, 10).ok


def test_mutant_compression_is_caught(monkeypatch, serial):
    real = rooted.mast_annotated
    monkeypatch.setattr(rooted, "mast_annotated", lambda w1, w2, stats=None: real(w1, w2, stats) + 1)
    assert not run_suite("compression", 0, 20, 10).ok


def test_mutant_unrooted_is_caught(monkeypatch, serial):
    real = unrooted.mast_unrooted

    def broken(u1, u2, mode=None, stats=None, leaf_size=2):
        v = real(u1, u2, mode, stats, leaf_size)
        return v + 1 if u1.n > 12 else v

    monkeypatch.setattr(unrooted, "mast_unrooted", broken)
    assert not run_suite("unrooted", 0, 20, 20).ok


def test_mutant_annotation_is_caught(monkeypatch, serial):
    # corrupt one alpha value written by the fast path; paranoid mode must notice
    real = unrooted._one_form_w

    def broken(sp, tg, yc):
        wi = real(sp, tg, yc)
        wi.alpha1[0] += 1
        return wi

    monkeypatch.setattr(unrooted, "_one_form_w", broken)
    res = run_suite("unrooted", 0, 10, 20, mode="paranoid")
    assert not res.ok


def test_mutant_rangequery_is_caught(monkeypatch, serial):
    real = rangequery.query_subtree_max
    monkeypatch.setattr(rangequery, "query_subtree_max", lambda idx, v, i: real(idx, v, i) - (i == 0))
    assert not run_suite("rangequery", 0, 5, 25).ok
