"""Graph and histogram file format (JSON)."""

from __future__ import annotations

import json
from pathlib import Path

from .dag import ComputationDag, DagNode, MergeAnnotation
from .histogram import PathHistogram


def dag_to_dict(dag: ComputationDag) -> dict:
    nodes = []
    for n in dag.nodes:
        d = {"id": n.id, "kind": n.kind, "active": n.active}
        if n.layer is not None:
            d["layer"] = n.layer
        nodes.append(d)
    return {
        "nodes": nodes,
        "edges": [{"src": a, "dst": b} for a, b in dag.edges],
        "source": dag.source,
        "sink": dag.sink,
        "merges": [{"node": m.node, "branches": [list(g) for g in m.branches]} for m in dag.merges],
    }


def dag_from_dict(d: dict) -> ComputationDag:
    nodes = tuple(
        DagNode(str(n["id"]), n.get("kind", "activation"), bool(n.get("active", True)), n.get("layer"))
        for n in d["nodes"]
    )
    edges = tuple((str(e["src"]), str(e["dst"])) for e in d["edges"])
    merges = tuple(
        MergeAnnotation(str(m["node"]), [[str(s) for s in g] for g in m["branches"]])
        for m in d.get("merges", [])
    )
    return ComputationDag(nodes, edges, str(d["source"]), str(d["sink"]), merges)


def save_dag(dag: ComputationDag, path) -> None:
    Path(path).write_text(json.dumps(dag_to_dict(dag), indent=1) + "\n")


def load_dag(path) -> ComputationDag:
    return dag_from_dict(json.loads(Path(path).read_text()))


def histogram_to_json(hist: PathHistogram) -> str:
    return json.dumps(hist.to_records())
