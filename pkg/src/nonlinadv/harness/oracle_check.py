"""Randomized cross-check of the histogram recursion against enumeration."""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from ..errors import InvalidSpec, OracleMismatch
from ..pathgraph import (
    NORMALIZED,
    UNNORMALIZED,
    brute_force_histogram,
    dag_to_dict,
    propagate_histograms,
    random_dag,
    random_series_parallel_dag,
    sink_histogram,
)
from ..pathgraph.fixtures import residual_layered_graph, skip_over_block_graph, sparse_layered_graph


def _compare(dag, mode, dp, label):
    got = dp(dag, mode)
    want = brute_force_histogram(dag, mode)
    if got != want:
        raise OracleMismatch(
            f"{label} ({mode}): recursion {got!r} != enumeration {want!r}",
            counterexample={"mode": mode, "dag": dag_to_dict(dag),
                            "dp": got.to_records(), "brute_force": want.to_records()})
    return got


def fixture_checks(dp=sink_histogram):
    """Hand-checkable graphs with known histograms."""
    out = {}
    g = sparse_layered_graph()
    h = _compare(g, UNNORMALIZED, dp, "sparse layered graph")
    if h != {1: 5, 2: 4}:
        raise OracleMismatch(f"sparse layered graph: {h!r} != {{1: 5, 2: 4}}",
                             counterexample={"dag": dag_to_dict(g)})
    out["sparse_layered"] = h.to_records()

    g = residual_layered_graph()
    _compare(g, NORMALIZED, dp, "residual layered graph")
    hists = propagate_histograms(g, NORMALIZED)
    half = Fraction(1, 2)
    for m in g.merges:
        if hists[m.node] != {2: half, 3: half}:
            raise OracleMismatch(f"merge {m.node}: {hists[m.node]!r} != {{2: 1/2, 3: 1/2}}",
                                 counterexample={"dag": dag_to_dict(g)})
    out["residual_layered"] = {m.node: hists[m.node].to_records() for m in g.merges}

    g = skip_over_block_graph()
    h = _compare(g, UNNORMALIZED, dp, "skip over block")
    if h.total != 257:
        raise OracleMismatch(f"skip over block: {h.total} paths, expected 257")
    _compare(g, NORMALIZED, dp, "skip over block")
    out["skip_over_block"] = h.to_records()
    return out


def oracle_check(trials=1000, max_nodes=14, seed=0, fixtures=True, dp=sink_histogram):
    """Compare ``dp`` with brute-force enumeration on random graphs.

    Each trial draws one general random graph (both modes) and one random
    series-parallel graph with merge annotations (both modes). Returns a
    report dict; raises OracleMismatch carrying the serialized
    counterexample on the first disagreement.
    """
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")
    if max_nodes < 2:
        raise InvalidSpec("max_nodes must be >= 2")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    report = {"trials": trials, "max_nodes": max_nodes, "seed": seed, "comparisons": 0}
    if fixtures:
        report["fixtures"] = fixture_checks(dp)
    for t in range(trials):
        for gen in (random_dag, random_series_parallel_dag):
            dag = gen(rng, max_nodes)
            for mode in (UNNORMALIZED, NORMALIZED):
                _compare(dag, mode, dp, f"trial {t} {gen.__name__}")
                report["comparisons"] += 1
    report["status"] = "pass"
    report["seconds"] = time.perf_counter() - t0
    return report
