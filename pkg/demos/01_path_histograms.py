"""
Path-length histograms of small graphs
======================================

Builds three hand-checkable graphs, computes their path-length histograms
with the topological recursion, and cross-checks each one by listing every
path explicitly.
"""

from fractions import Fraction

from nonlinadv.pathgraph import (
    NORMALIZED,
    brute_force_histogram,
    count_paths_dfs,
    dag_apl,
    dag_napl,
    propagate_histograms,
    resblock_chain_dag,
    sink_histogram,
)
from nonlinadv.pathgraph.fixtures import residual_layered_graph, skip_over_block_graph, sparse_layered_graph

# A sparse layered graph. Some input units reach the output through one
# active unit, some through two.
g = sparse_layered_graph()
h = sink_histogram(g)
print("sparse layered graph:", dict(h.counts), " enumeration:", dict(brute_force_histogram(g).counts))
print("  APL =", dag_apl(g))

# Residual layers. In normalized mode every merge mixes its branches with
# equal weight, so each merge node sees half its mass at length 2 and half
# at length 3.
g = residual_layered_graph()
hists = propagate_histograms(g, NORMALIZED)
for m in g.merges:
    print(f"merge {m.node}:", {k: str(v) for k, v in hists[m.node].counts.items()})

# One skip connection around a block of four fully connected layers.
# 256 paths go through the block and one path skips it. Counting paths
# makes the block dominate (APL near 4), while the normalized view gives
# the skip half the mass (NAPL = 2).
g = skip_over_block_graph()
print("skip over block:", count_paths_dfs(g), "paths")
print("  unnormalized", dict(sink_histogram(g).counts), " APL =", dag_apl(g))
print("  normalized  ", {k: str(v) for k, v in sink_histogram(g, NORMALIZED).counts.items()},
      " NAPL =", dag_napl(g))

# A chain of k residual blocks with two activations each: NAPL is k,
# half the nominal depth.
for k in (1, 2, 5, 10):
    d = resblock_chain_dag(k)
    assert dag_napl(d) == k
    print(f"chain of {k:2d} blocks: NAPL = {dag_napl(d)}, max depth {2 * k}")

assert sink_histogram(g, NORMALIZED).counts[0] == Fraction(1, 2)
