"""Nonlinear computation graphs and their structural validation."""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

from ..errors import ConnectivityError, CycleError, DagError, MergeError

ACTIVATION = "activation"
PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class DagNode:
    id: str
    kind: str = ACTIVATION
    active: bool = True
    layer: int | None = None

    def __post_init__(self):
        if self.kind not in (ACTIVATION, PASSTHROUGH):
            raise DagError(f"unknown node kind {self.kind!r}")

    @property
    def counts(self) -> bool:
        """True when traversing this node adds one to the effective length."""
        return self.kind == ACTIVATION and self.active


@dataclass(frozen=True)
class MergeAnnotation:
    """Declares that ``node`` sums distinct residual branches.

    ``branches`` groups the predecessor ids of ``node``; each group is one branch.
    """

    node: str
    branches: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(tuple(g) for g in self.branches))


@dataclass(frozen=True)
class ComputationDag:
    nodes: tuple[DagNode, ...]
    edges: tuple[tuple[str, str], ...]
    source: str
    sink: str
    merges: tuple[MergeAnnotation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        object.__setattr__(self, "merges", tuple(self.merges))

    @cached_property
    def node_map(self) -> dict[str, DagNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def predecessors(self) -> dict[str, list[str]]:
        preds = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            preds[b].append(a)
        return preds

    @cached_property
    def successors(self) -> dict[str, list[str]]:
        succ = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            succ[a].append(b)
        return succ

    @cached_property
    def merge_map(self) -> dict[str, MergeAnnotation]:
        return {m.node: m for m in self.merges}

    def with_active(self, active: dict[str, bool]) -> ComputationDag:
        """Copy of the dag with the active flags of the given nodes replaced."""
        nodes = tuple(
            DagNode(n.id, n.kind, active.get(n.id, n.active), n.layer) for n in self.nodes
        )
        return ComputationDag(nodes, self.edges, self.source, self.sink, self.merges)

    def relabel(self, mapping: dict[str, str]) -> ComputationDag:
        nodes = tuple(DagNode(mapping[n.id], n.kind, n.active, n.layer) for n in self.nodes)
        edges = tuple((mapping[a], mapping[b]) for a, b in self.edges)
        merges = tuple(
            MergeAnnotation(mapping[m.node], [[mapping[s] for s in g] for g in m.branches])
            for m in self.merges
        )
        return ComputationDag(nodes, edges, mapping[self.source], mapping[self.sink], merges)


def validate_dag(dag: ComputationDag) -> list[str]:
    """Check the dag and return its topological order.

    Ties between ready nodes are broken by ascending id so the order is
    deterministic.
    """
    ids = [n.id for n in dag.nodes]
    if len(set(ids)) != len(ids):
        raise DagError("node ids are not unique")
    known = set(ids)
    for end in (dag.source, dag.sink):
        if end not in known:
            raise DagError(f"unknown source/sink node {end!r}")
    seen_edges = set()
    for a, b in dag.edges:
        if a not in known or b not in known:
            raise DagError(f"edge ({a!r}, {b!r}) references an unknown node")
        if (a, b) in seen_edges:
            raise DagError(f"duplicate edge ({a!r}, {b!r})")
        seen_edges.add((a, b))

    indeg = {i: 0 for i in ids}
    for _, b in dag.edges:
        indeg[b] += 1
    ready = [i for i, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for w in dag.successors[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(order) != len(ids):
        raise CycleError("edge relation contains a cycle")

    if dag.predecessors[dag.source]:
        raise ConnectivityError("source has incoming edges")
    if dag.successors[dag.sink]:
        raise ConnectivityError("sink has outgoing edges")
    fwd = _reach(dag.source, dag.successors)
    bwd = _reach(dag.sink, dag.predecessors)
    for i in ids:
        if i not in fwd:
            raise ConnectivityError(f"node {i!r} is unreachable from the source")
        if i not in bwd:
            raise ConnectivityError(f"node {i!r} does not reach the sink")

    merged = set()
    for m in dag.merges:
        if m.node not in known:
            raise MergeError(f"merge annotation on unknown node {m.node!r}")
        if m.node in merged:
            raise MergeError(f"node {m.node!r} carries two merge annotations")
        merged.add(m.node)
        if len(m.branches) < 2 or any(len(g) == 0 for g in m.branches):
            raise MergeError(f"merge at {m.node!r} needs >= 2 non-empty branches")
        flat = [s for g in m.branches for s in g]
        if len(flat) != len(set(flat)) or set(flat) != set(dag.predecessors[m.node]):
            raise MergeError(f"branches at {m.node!r} do not partition its incoming edges")
    return order


def _reach(start, adj):
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def chain_dag(n: int, active=True) -> ComputationDag:
    """Source -> n activation nodes -> sink, in a line."""
    ids = ["src"] + [f"a{i:03d}" for i in range(n)] + ["snk"]
    nodes = [DagNode("src", "passthrough")]
    nodes += [DagNode(i, ACTIVATION, bool(active), k) for k, i in enumerate(ids[1:-1])]
    nodes.append(DagNode("snk", "passthrough"))
    edges = list(zip(ids[:-1], ids[1:]))
    return ComputationDag(tuple(nodes), tuple(edges), "src", "snk")


def resblock_chain_dag(k: int, main_len: int = 2, active=True) -> ComputationDag:
    """k idealized residual blocks: a main branch of ``main_len`` activation
    nodes in parallel with a passthrough skip, merged at a passthrough node."""
    nodes = [DagNode("b00_in", PASSTHROUGH)]
    edges = []
    merges = []
    prev = "b00_in"
    for b in range(k):
        tail = prev
        for j in range(main_len):
            nid = f"b{b:02d}_a{j}"
            nodes.append(DagNode(nid, ACTIVATION, bool(active), 2 * b + j))
            edges.append((tail, nid))
            tail = nid
        skip = f"b{b:02d}_skip"
        out = f"b{b + 1:02d}_in"
        nodes += [DagNode(skip, PASSTHROUGH), DagNode(out, PASSTHROUGH)]
        edges += [(prev, skip), (tail, out), (skip, out)]
        merges.append(MergeAnnotation(out, ((tail,), (skip,))))
        prev = out
    return ComputationDag(tuple(nodes), tuple(edges), "b00_in", prev, tuple(merges))


def layered_dag(widths, edges_between, active, skips=(), merge_skips=False) -> ComputationDag:
    """Build a dag from layers of nodes named ``l{layer}{index}`` (1-based),
    with source ``i``; the last layer must have width 1 and acts as sink.

    ``edges_between[d]`` lists (a, b) index pairs from layer d to d+1, where
    layer 0 is the source. ``skips`` are extra (node, node) id pairs; with
    ``merge_skips`` each skip target becomes a two-branch merge.
    """
    nodes = [DagNode("i", PASSTHROUGH)]
    layers = [["i"]]
    for d, w in enumerate(widths, start=1):
        ids = [f"l{d}{j}" for j in range(1, w + 1)]
        layers.append(ids)
        nodes += [DagNode(i, ACTIVATION, i in active, d) for i in ids]
    edges = []
    for d, pairs in enumerate(edges_between):
        for a, b in pairs:
            edges.append((layers[d][a - 1], layers[d + 1][b - 1]))
    edges += list(skips)
    merges = []
    if merge_skips:
        preds = defaultdict(list)
        for a, b in edges:
            preds[b].append(a)
        for a, b in skips:
            main = tuple(p for p in preds[b] if p != a)
            merges.append(MergeAnnotation(b, (main, (a,))))
    sink = layers[-1][0] if len(layers[-1]) == 1 else None
    if sink is None:
        nodes.append(DagNode("o", PASSTHROUGH))
        edges += [(i, "o") for i in layers[-1]]
        sink = "o"
    return ComputationDag(tuple(nodes), tuple(edges), "i", sink, tuple(merges))
