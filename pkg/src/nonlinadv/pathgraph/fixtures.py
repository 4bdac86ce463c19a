"""Small reference graphs with hand-checkable histograms."""

from __future__ import annotations

from .dag import PASSTHROUGH, ComputationDag, DagNode, MergeAnnotation, layered_dag


def _full(a, b):
    return [(i, j) for i in range(1, a + 1) for j in range(1, b + 1)]


def sparse_layered_graph() -> ComputationDag:
    """Three layers of width 3 with sparse connectivity, then a single output.

    Active units: l12, l21, l23, l31. Sink histogram: {1: 5, 2: 4}.
    """
    edges = [
        [(1, 1), (1, 2), (1, 3)],
        [(1, 1), (1, 2), (1, 3), (2, 2), (3, 2), (3, 3)],
        [(1, 1), (1, 2), (2, 1), (3, 1), (3, 3)],
        [(1, 1), (2, 1), (3, 1)],
    ]
    return layered_dag([3, 3, 3, 1], edges, active={"l12", "l21", "l23", "l31"})


def residual_layered_graph() -> ComputationDag:
    """Three fully connected all-active layers of width 3 with identity skips
    from layer 1 into layer 3; every layer-3 node merges main and skip."""
    edges = [[(1, 1), (1, 2), (1, 3)], _full(3, 3), _full(3, 3)]
    active = {f"l{d}{j}" for d in (1, 2, 3) for j in (1, 2, 3)}
    skips = [("l11", "l31"), ("l12", "l32"), ("l13", "l33")]
    return layered_dag([3, 3, 3], edges, active, skips=skips, merge_skips=True)


def skip_over_block_graph(width: int = 4, depth: int = 4) -> ComputationDag:
    """A fork feeding ``depth`` fully connected active layers of ``width``
    that rejoin at a merge, plus one direct fork->merge skip edge."""
    nodes = [DagNode("fork", PASSTHROUGH)]
    layers = [["fork"]]
    for d in range(1, depth + 1):
        ids = [f"h{d}_{j}" for j in range(width)]
        nodes += [DagNode(i, "activation", True, d) for i in ids]
        layers.append(ids)
    nodes.append(DagNode("merge", PASSTHROUGH))
    edges = [(a, b) for prev, cur in zip(layers, layers[1:]) for a in prev for b in cur]
    edges += [(a, "merge") for a in layers[-1]]
    edges.append(("fork", "merge"))
    merges = (MergeAnnotation("merge", (tuple(layers[-1]), ("fork",))),)
    return ComputationDag(tuple(nodes), tuple(edges), "fork", "merge", merges)
