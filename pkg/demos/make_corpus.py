"""
Write the small sample corpus used by the CLI tests and the README.

Run from the repository root::

    python3 demos/make_corpus.py

Files are regenerated deterministically from a fixed seed.
"""

from pathlib import Path

import numpy as np

from agreetree.matching import write_edge_list
from agreetree.oracle import random_bipartite, random_mixed_tree, random_rooted_tree, random_unrooted_tree
from agreetree.tree import serialize_newick

OUT = Path(__file__).resolve().parent / "corpus"


def main(seed: int = 2024):
    rng = np.random.default_rng(seed)
    OUT.mkdir(exist_ok=True)
    for k in range(3):
        labels = [f"s{i}" for i in range(8 + 2 * k)]
        for side in "ab":
            t = random_rooted_tree(rng, labels, [2, None, 3][k])
            (OUT / f"rooted{k}_{side}.nwk").write_text(serialize_newick(t) + "\n")
    for k in range(3):
        labels = [f"u{i}" for i in range(10 + 5 * k)]
        for side in "ab":
            t = random_unrooted_tree(rng, labels, [3, None, 3][k])
            (OUT / f"unrooted{k}_{side}.nwk").write_text(serialize_newick(t) + "\n")
    for k in range(2):
        labels = [f"m{i}" for i in range(9 + 3 * k)]
        for side in "ab":
            t = random_mixed_tree(rng, labels, 0.25)
            (OUT / f"mixed{k}_{side}.nwk").write_text(serialize_newick(t) + "\n")
    for k, (nx, ny) in enumerate([(4, 5), (7, 7), (10, 6)]):
        g = random_bipartite(rng, nx, ny, 0.4, 50)
        (OUT / f"graph{k}.edges").write_text(write_edge_list(g))
    (OUT / "single.edges").write_text("1 1 1\n1 1 7\n")
    (OUT / "empty.edges").write_text("0 0 0\n")


if __name__ == "__main__":
    main()
