"""Exact path-length histograms over a computation dag.

Counts are Python ints (unnormalized) or ``Fraction`` (normalized), so
nothing overflows however many paths the graph has.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import EmptyHistogram, EmptyMask, ZeroMassBranch
from .dag import ComputationDag, validate_dag

UNNORMALIZED = "unnormalized"
NORMALIZED = "normalized"
MODES = (UNNORMALIZED, NORMALIZED)


@dataclass(frozen=True)
class PathHistogram:
    counts: dict
    mode: str = UNNORMALIZED

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown histogram mode {self.mode!r}")
        clean = {}
        for k, v in self.counts.items():
            if v < 0:
                raise ValueError("histogram counts must be non-negative")
            if v:
                clean[int(k)] = v if self.mode == NORMALIZED else int(v)
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @classmethod
    def from_list(cls, values, mode=UNNORMALIZED):
        return cls({i: v for i, v in enumerate(values) if v}, mode)

    def to_list(self, length=None):
        n = max(self.counts, default=-1) + 1 if length is None else length
        zero = Fraction(0) if self.mode == NORMALIZED else 0
        return [self.counts.get(i, zero) for i in range(n)]

    @property
    def total(self):
        return sum(self.counts.values())

    def __eq__(self, other):
        if isinstance(other, PathHistogram):
            return self.mode == other.mode and self.counts == other.counts
        if isinstance(other, dict):
            return self.counts == {k: v for k, v in other.items() if v}
        return NotImplemented

    def __repr__(self):
        body = ", ".join(f"{k}: {v}" for k, v in self.counts.items())
        return f"PathHistogram({{{body}}}, mode={self.mode!r})"

    def to_records(self):
        """Serializable form: list of {length, count} with counts as exact strings."""
        return [{"length": k, "count": str(v)} for k, v in self.counts.items()]

    @classmethod
    def from_records(cls, records, mode=None):
        counts = {int(r["length"]): Fraction(r["count"]) for r in records}
        if mode is None:
            mode = NORMALIZED if any(c.denominator != 1 for c in counts.values()) else UNNORMALIZED
        if mode == UNNORMALIZED:
            counts = {k: int(v) for k, v in counts.items()}
        return cls(counts, mode)


def _add_into(acc, hist):
    if len(hist) > len(acc):
        acc.extend([0] * (len(hist) - len(acc)))
    for i, v in enumerate(hist):
        acc[i] += v


def propagate_histograms(dag: ComputationDag, mode: str = UNNORMALIZED) -> dict:
    """Histogram of effective path lengths from the source to every node.

    Each node sums the histograms of its predecessors and shifts the result
    by one when it is an active activation node. In normalized mode, nodes
    carrying a merge annotation instead sum within each branch, rescale
    every branch to unit mass and average the branches.
    """
    if mode not in MODES:
        raise ValueError(f"unknown histogram mode {mode!r}")
    order = validate_dag(dag)
    nodes = dag.node_map
    preds = dag.predecessors
    merges = dag.merge_map if mode == NORMALIZED else {}
    one = Fraction(1) if mode == NORMALIZED else 1
    hists: dict[str, list] = {}
    for v in order:
        if v == dag.source:
            # the source's own activation flag is deliberately ignored
            hists[v] = [one]
            continue
        m = merges.get(v)
        if m is None:
            acc = []
            for u in preds[v]:
                _add_into(acc, hists[u])
        else:
            acc = []
            nb = len(m.branches)
            for group in m.branches:
                part = []
                for u in group:
                    _add_into(part, hists[u])
                mass = sum(part)
                if mass == 0:
                    raise ZeroMassBranch(f"branch {group} into {v!r} carries no paths")
                _add_into(acc, [Fraction(x) / (mass * nb) for x in part])
        if nodes[v].counts:
            acc = [0 * one] + acc
        hists[v] = acc
    return {v: PathHistogram.from_list(h, mode) for v, h in hists.items()}


def sink_histogram(dag: ComputationDag, mode: str = UNNORMALIZED) -> PathHistogram:
    return propagate_histograms(dag, mode)[dag.sink]


def apl(hist: PathHistogram) -> float:
    """Mean effective path length of a histogram."""
    total = hist.total
    if total == 0:
        raise EmptyHistogram("histogram has zero total mass")
    return float(Fraction(sum(k * v for k, v in hist.counts.items())) / total)


def dag_apl(dag: ComputationDag) -> float:
    return apl(sink_histogram(dag, UNNORMALIZED))


def dag_napl(dag: ComputationDag) -> float:
    return apl(sink_histogram(dag, NORMALIZED))


def max_effective_depth(dag: ComputationDag) -> int:
    """Largest number of active activation nodes on any source->sink path."""
    order = validate_dag(dag)
    nodes = dag.node_map
    best = {}
    for v in order:
        if v == dag.source:
            best[v] = 0
            continue
        best[v] = max(best[u] for u in dag.predecessors[v]) + int(nodes[v].counts)
    return best[dag.sink]


class ActivationMask:
    """Per-layer activity bits: 1 marks an active (nonlinear) unit."""

    def __init__(self, layers):
        self.layers = [np.asarray(l, dtype=bool).ravel().copy() for l in layers]

    @classmethod
    def from_strings(cls, rows):
        return cls([[c == "1" for c in r] for r in rows])

    def to_strings(self):
        return ["".join("1" if b else "0" for b in l) for l in self.layers]

    @property
    def shape(self):
        return [len(l) for l in self.layers]

    @property
    def total(self):
        return sum(len(l) for l in self.layers)

    @property
    def active_count(self):
        return int(sum(l.sum() for l in self.layers))

    def flat(self):
        return np.concatenate(self.layers) if self.layers else np.zeros(0, bool)

    def copy(self):
        return ActivationMask(self.layers)

    def __eq__(self, other):
        if not isinstance(other, ActivationMask):
            return NotImplemented
        return self.shape == other.shape and all(
            np.array_equal(a, b) for a, b in zip(self.layers, other.layers)
        )

    def __repr__(self):
        return f"ActivationMask({self.to_strings()})"


def enw(mask: ActivationMask) -> float:
    """Effective network width: active units per layer, averaged over layers."""
    if not mask.layers:
        raise EmptyMask("mask has no layers")
    return mask.active_count / len(mask.layers)


def active_fraction(mask: ActivationMask) -> float:
    if mask.total == 0:
        raise EmptyMask("mask has no units")
    return mask.active_count / mask.total
