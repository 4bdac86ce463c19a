"""Random graph generators for oracle and property testing."""

from __future__ import annotations

import numpy as np

from .dag import ACTIVATION, PASSTHROUGH, ComputationDag, DagNode, MergeAnnotation


def random_dag(rng: np.random.Generator, max_nodes: int = 14, edge_prob: float = 0.35,
               active_prob: float = 0.5) -> ComputationDag:
    """Random connected dag on 2..max_nodes nodes with random activity flags.

    Nodes are placed in a random order; edges only go forward. Nodes without
    predecessors get an edge from the source and nodes without successors
    get an edge to the sink, which guarantees the connectivity invariants.
    """
    n = int(rng.integers(2, max_nodes + 1))
    ids = [f"n{i:02d}" for i in rng.permutation(n)]
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                edges.add((i, j))
    for j in range(1, n):
        if not any(b == j for _, b in edges):
            edges.add((0, j))
    for i in range(n - 1):
        if not any(a == i for a, _ in edges):
            edges.add((i, n - 1))
    kinds = rng.random(n) < 0.8
    active = rng.random(n) < active_prob
    nodes = tuple(
        DagNode(ids[i], ACTIVATION if kinds[i] else PASSTHROUGH, bool(active[i]))
        for i in range(n)
    )
    edge_list = tuple((ids[a], ids[b]) for a, b in sorted(edges))
    return ComputationDag(nodes, edge_list, ids[0], ids[-1])


class _Builder:
    def __init__(self, rng, budget, active_prob):
        self.rng = rng
        self.budget = budget
        self.active_prob = active_prob
        self.nodes = []
        self.edges = []
        self.merges = []

    def node(self, kind=None):
        nid = f"v{len(self.nodes):02d}"
        if kind is None:
            kind = ACTIVATION if self.rng.random() < 0.85 else PASSTHROUGH
        self.nodes.append(DagNode(nid, kind, bool(self.rng.random() < self.active_prob)))
        self.budget -= 1
        return nid

    def block(self, entry, depth):
        """Attach a random series-parallel block after ``entry``; return its exit."""
        r = self.rng.random()
        if self.budget < 4 or depth > 3 or r < 0.35:
            v = self.node()
            self.edges.append((entry, v))
            return v
        if r < 0.6:
            return self.block(self.block(entry, depth + 1), depth + 1)
        return self.parallel(entry, depth)

    def parallel(self, entry, depth):
        n_branches = int(self.rng.integers(2, 4))
        exits = []
        skip_used = False
        for _ in range(n_branches):
            if not skip_used and self.rng.random() < 0.3:
                skip_used = True
                exits.append((entry,))
                continue
            if self.budget < 2:
                break
            tail = self.block(entry, depth + 1)
            if self.budget >= 3 and self.rng.random() < 0.3:
                # fan the branch out so its group holds several edges
                fan = tuple(self.node() for _ in range(int(self.rng.integers(2, 4))))
                self.edges += [(tail, f) for f in fan]
                exits.append(fan)
            else:
                exits.append((tail,))
        if len(exits) < 2:
            if not skip_used:
                exits.append((entry,))
            else:
                v = self.node()
                self.edges.append((entry, v))
                exits.append((v,))
        out = self.node()
        for group in exits:
            self.edges += [(u, out) for u in group]
        self.merges.append(MergeAnnotation(out, exits))
        return out


def random_series_parallel_dag(rng: np.random.Generator, max_nodes: int = 14,
                               active_prob: float = 0.5) -> ComputationDag:
    """Random series-parallel dag whose parallel joins carry merge annotations."""
    while True:
        b = _Builder(rng, max_nodes - 1, active_prob)
        src = b.node(PASSTHROUGH)
        b.budget = max_nodes - 1
        exit_ = b.block(src, 0)
        if len(b.nodes) <= max_nodes:
            return ComputationDag(tuple(b.nodes), tuple(b.edges), src, exit_, tuple(b.merges))
