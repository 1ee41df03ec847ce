"""
Walk through the all-cavity computation on a three-edge graph.

Deleting a single node from a weighted bipartite graph changes its maximum
matching weight; this script shows how one matching plus one longest-path
pass over an auxiliary digraph yields every such value at once, and checks
the answer against recomputing each deletion from scratch.

    python3 demos/cavity_walkthrough.py
"""

from agreetree.matching import (
    WeightedBipartiteGraph,
    all_cavity,
    build_cavity_digraph,
    longest_path_weights,
    max_weight_matching,
)
from agreetree.oracle import naive_all_cavity


def name(d, k):
    if k == d.t:
        return "t"
    return f"x{k + 1}" if k < d.nx else f"y{k - d.nx + 1}"


def main():
    # x1-y1 (5), x1-y2 (2), x2-y1 (3)
    g = WeightedBipartiteGraph(2, 2, [(0, 0, 5), (0, 1, 2), (1, 0, 3)])
    m = max_weight_matching(g)
    print(f"maximum matching {m.pairs()} with weight {m.weight}")

    d = build_cavity_digraph(g, m)
    print("\ndigraph arcs (x side):")
    for a, b, w in d.arcs():
        print(f"  {name(d, a):>3} -> {name(d, b):<3} {w:+d}")

    # longest path from each node to t is the loss for deleting it
    dist = longest_path_weights(d)
    print("\nlongest path to t:", {name(d, k): int(dist[k]) for k in range(d.nx)})

    res = all_cavity(g)
    total, vx, vy = naive_all_cavity(g)
    print("\nnode  cavity  recomputed")
    for i in range(g.nx):
        print(f"x{i + 1}    {res.values_x[i]:>4}    {vx[i]:>4}")
    for j in range(g.ny):
        print(f"y{j + 1}    {res.values_y[j]:>4}    {vy[j]:>4}")
    assert res.mwm == total and res.values_x.tolist() == vx and res.values_y.tolist() == vy


if __name__ == "__main__":
    main()
