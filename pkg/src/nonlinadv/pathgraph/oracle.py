"""Brute-force path enumeration, used to cross-check the histogram recursion."""

from __future__ import annotations

from collections import Counter
from fractions import Fraction

from ..errors import TooLarge, ZeroMassBranch
from .dag import ComputationDag, validate_dag
from .histogram import NORMALIZED, UNNORMALIZED, PathHistogram

DEFAULT_CAP = 200_000


def enumerate_paths(dag: ComputationDag, mode: str = UNNORMALIZED, cap: int = DEFAULT_CAP):
    """Every source->sink path with its weight.

    Unnormalized weights are all 1. Normalized weights are built per path:
    at a merge with B branches a path entering through branch g is scaled by
    1 / (B * W_g), where W_g is the summed weight of all prefixes that enter
    the merge through g. Prefixes are listed explicitly, never aggregated
    by length, so this stays independent of the histogram recursion.
    """
    validate_dag(dag)
    merges = dag.merge_map if mode == NORMALIZED else {}
    preds = dag.predecessors
    memo: dict[str, list] = {}
    size = 0

    def prefixes(v):
        nonlocal size
        if v in memo:
            return memo[v]
        if v == dag.source:
            out = [((v,), Fraction(1))]
        elif v in merges:
            m = merges[v]
            out = []
            for group in m.branches:
                part = [(p + (v,), w) for u in group for p, w in prefixes(u)]
                mass = sum(w for _, w in part)
                if mass == 0:
                    raise ZeroMassBranch(f"branch {group} into {v!r} carries no paths")
                out += [(p, w / (mass * len(m.branches))) for p, w in part]
        else:
            out = [(p + (v,), w) for u in preds[v] for p, w in prefixes(u)]
        size += len(out)
        if size > cap:
            raise TooLarge(f"more than {cap} path prefixes")
        memo[v] = out
        return out

    # iterative warm-up in topological order keeps recursion depth small
    for v in validate_dag(dag):
        prefixes(v)
    return memo[dag.sink]


def effective_length(dag: ComputationDag, path) -> int:
    nodes = dag.node_map
    return sum(1 for v in path[1:] if nodes[v].counts)


def brute_force_histogram(dag: ComputationDag, mode: str = UNNORMALIZED,
                          cap: int = DEFAULT_CAP) -> PathHistogram:
    tally = Counter()
    for path, w in enumerate_paths(dag, mode, cap):
        tally[effective_length(dag, path)] += w
    if mode == UNNORMALIZED:
        return PathHistogram({k: int(v) for k, v in tally.items()}, UNNORMALIZED)
    return PathHistogram(dict(tally), NORMALIZED)


def count_paths_dfs(dag: ComputationDag, cap: int = DEFAULT_CAP) -> int:
    """Plain depth-first count of source->sink paths."""
    validate_dag(dag)
    succ = dag.successors
    count = 0
    stack = [dag.source]
    while stack:
        v = stack.pop()
        if v == dag.sink:
            count += 1
            if count > cap:
                raise TooLarge(f"more than {cap} paths")
            continue
        stack.extend(succ[v])
    return count
