"""
Agreement subtrees of rooted, unrooted and mixed trees.

Compares small trees in each of the three modes, prints a witness for the
rooted case and shows the recursion counters for a larger unrooted pair.

    python3 demos/mast_tour.py
"""

import numpy as np

from agreetree import mast_mixed, mast_rooted, mast_unrooted, parse_newick, rooted_witness, serialize_newick
from agreetree.oracle import naive_mast_unrooted, random_unrooted_tree
from agreetree.unrooted import RecursionStats


def rooted_example():
    t1 = parse_newick("((a,b),(c,(d,e)));", rooted=True)
    t2 = parse_newick("((a,c),(b,(d,e)));", rooted=True)
    size, wit = rooted_witness(t1, t2)
    print(f"rooted: mast = {mast_rooted(t1, t2)}, witness {serialize_newick(wit)}")
    assert size == len(wit.leaf_labels())


def unrooted_example():
    # the same split a|b vs c|d read two different ways
    u1 = parse_newick("((a,b),c,(d,e));")
    u2 = parse_newick("((a,c),b,(d,e));")
    print(f"unrooted: mast = {mast_unrooted(u1, u2)}")


def mixed_example():
    # '>' directs the edge from parent to child, '<' from child to parent;
    # directed edges limit where an agreement subtree may be rooted
    text = "(((>a,>d),<c),<e,<(>b,f));"
    m1 = parse_newick(text)
    u2 = parse_newick("((d,f),b,((c,a),e));")
    plain = parse_newick(text.replace(">", "").replace("<", ""))
    print(f"mixed: mast = {mast_mixed(m1, u2)}, with directions dropped {mast_unrooted(plain, u2)}")


def larger_pair(n=200, seed=7):
    rng = np.random.default_rng(seed)
    labels = list(range(n))
    u1 = random_unrooted_tree(rng, labels, 3)
    u2 = random_unrooted_tree(rng, labels, 3)
    st = RecursionStats()
    value = mast_unrooted(u1, u2, stats=st)
    print(f"\n{n}-leaf random pair: mast = {value}")
    for k, v in st.as_dict().items():
        print(f"  {k:>20}: {v}")
    small = [random_unrooted_tree(rng, labels[:15], 3) for _ in range(2)]
    assert mast_unrooted(*small) == naive_mast_unrooted(*small)


if __name__ == "__main__":
    rooted_example()
    unrooted_example()
    mixed_example()
    larger_pair()
