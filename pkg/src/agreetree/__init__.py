"""Maximum agreement subtrees via all-cavity matchings and label compression."""

from .matching import CavityResult, WeightedBipartiteGraph, all_cavity, max_weight_matching
from .rangequery import SparseArray, build_subtree_index, query_subtree_max
from .rooted import mast_rooted, rooted_witness
from .tree import Tree, parse_newick, serialize_newick
from .unrooted import RecursionStats, mast_mixed, mast_unrooted

__all__ = [
    "Tree",
    "parse_newick",
    "serialize_newick",
    "WeightedBipartiteGraph",
    "CavityResult",
    "all_cavity",
    "max_weight_matching",
    "SparseArray",
    "build_subtree_index",
    "query_subtree_max",
    "mast_rooted",
    "rooted_witness",
    "mast_unrooted",
    "mast_mixed",
    "RecursionStats",
]
__version__ = "0.1.0"
