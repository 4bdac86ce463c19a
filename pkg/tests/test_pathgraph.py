from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlinadv.errors import (
    ConnectivityError,
    CycleError,
    DagError,
    EmptyHistogram,
    EmptyMask,
    MergeError,
    TooLarge,
)
from nonlinadv.pathgraph import (
    ACTIVATION,
    NORMALIZED,
    PASSTHROUGH,
    UNNORMALIZED,
    ActivationMask,
    ComputationDag,
    DagNode,
    MergeAnnotation,
    PathHistogram,
    active_fraction,
    apl,
    brute_force_histogram,
    chain_dag,
    count_paths_dfs,
    dag_apl,
    dag_from_dict,
    dag_napl,
    dag_to_dict,
    enumerate_paths,
    enw,
    layered_dag,
    load_dag,
    max_effective_depth,
    propagate_histograms,
    random_dag,
    random_series_parallel_dag,
    resblock_chain_dag,
    save_dag,
    sink_histogram,
    validate_dag,
)
from nonlinadv.pathgraph.fixtures import (
    residual_layered_graph,
    skip_over_block_graph,
    sparse_layered_graph,
)

seeds = st.integers(0, 2**32 - 1)


def _dag(nodes, edges, source="s", sink="t", merges=()):
    return ComputationDag(tuple(nodes), tuple(edges), source, sink, tuple(merges))


def diamond(active=True):
    nodes = [DagNode("s", PASSTHROUGH), DagNode("a", ACTIVATION, active),
             DagNode("b", PASSTHROUGH), DagNode("t", PASSTHROUGH)]
    return _dag(nodes, [("s", "a"), ("s", "b"), ("a", "t"), ("b", "t")],
                merges=[MergeAnnotation("t", (("a",), ("b",)))])


class TestValidation:
    def test_topological_order_is_deterministic(self):
        d = diamond()
        assert validate_dag(d) == ["s", "a", "b", "t"]

    def test_cycle(self):
        nodes = [DagNode(i) for i in "sabt"]
        d = _dag(nodes, [("s", "a"), ("a", "b"), ("b", "a"), ("b", "t")])
        with pytest.raises(CycleError):
            validate_dag(d)

    def test_duplicate_edge(self):
        d = _dag([DagNode("s"), DagNode("t")], [("s", "t"), ("s", "t")])
        with pytest.raises(DagError):
            validate_dag(d)

    def test_duplicate_ids(self):
        d = _dag([DagNode("s"), DagNode("s"), DagNode("t")], [("s", "t")])
        with pytest.raises(DagError):
            validate_dag(d)

    def test_unknown_edge_endpoint(self):
        d = _dag([DagNode("s"), DagNode("t")], [("s", "x")])
        with pytest.raises(DagError):
            validate_dag(d)

    def test_unreachable_node(self):
        d = _dag([DagNode("s"), DagNode("x"), DagNode("t")], [("s", "t")])
        with pytest.raises(ConnectivityError):
            validate_dag(d)

    def test_dead_end_node(self):
        d = _dag([DagNode("s"), DagNode("x"), DagNode("t")], [("s", "t"), ("s", "x")])
        with pytest.raises(ConnectivityError):
            validate_dag(d)

    def test_source_with_incoming_edge(self):
        d = _dag([DagNode("s"), DagNode("t")], [("s", "t"), ("t", "s")])
        with pytest.raises(DagError):
            validate_dag(d)

    def test_merge_must_partition_predecessors(self):
        d = diamond()
        bad = _dag(d.nodes, d.edges, merges=[MergeAnnotation("t", (("a",), ("a", "b")))])
        with pytest.raises(MergeError):
            validate_dag(bad)
        missing = _dag(d.nodes, d.edges, merges=[MergeAnnotation("t", (("a",),))])
        with pytest.raises(MergeError):
            validate_dag(missing)

    def test_bad_node_kind(self):
        with pytest.raises(DagError):
            DagNode("x", "convolution")


class TestHistograms:
    @pytest.mark.parametrize("d", range(0, 8))
    def test_chain_is_a_point_mass(self, d):
        h = sink_histogram(chain_dag(d))
        assert h == {d: 1}
        assert dag_apl(chain_dag(d)) == d

    def test_inactive_chain_has_length_zero(self):
        assert sink_histogram(chain_dag(5, active=False)) == {0: 1}

    def test_source_flag_is_ignored(self):
        d = chain_dag(3)
        src_on = d.with_active({"src": True})
        assert sink_histogram(src_on) == sink_histogram(d)

    @pytest.mark.parametrize("k", range(1, 9))
    def test_resblock_chain_is_binomial(self, k):
        d = resblock_chain_dag(k)
        assert sink_histogram(d, UNNORMALIZED) == {2 * j: comb(k, j) for j in range(k + 1)}
        want = {2 * j: Fraction(comb(k, j), 2**k) for j in range(k + 1)}
        assert sink_histogram(d, NORMALIZED) == want
        assert dag_napl(d) == k

    def test_normalization_matters_with_unequal_branches(self):
        # main branch: two parallel active nodes, skip: one passthrough
        nodes = [DagNode("s", PASSTHROUGH), DagNode("a1"), DagNode("a2"),
                 DagNode("k", PASSTHROUGH), DagNode("t", PASSTHROUGH)]
        edges = [("s", "a1"), ("s", "a2"), ("s", "k"), ("a1", "t"), ("a2", "t"), ("k", "t")]
        d = _dag(nodes, edges, merges=[MergeAnnotation("t", (("a1", "a2"), ("k",)))])
        assert sink_histogram(d, UNNORMALIZED) == {0: 1, 1: 2}
        assert sink_histogram(d, NORMALIZED) == {0: Fraction(1, 2), 1: Fraction(1, 2)}
        assert dag_apl(d) == pytest.approx(2 / 3, abs=1e-15)
        assert dag_napl(d) == 0.5

    def test_merge_annotation_ignored_in_unnormalized_mode(self):
        d = diamond()
        plain = _dag(d.nodes, d.edges)
        assert sink_histogram(d, UNNORMALIZED) == sink_histogram(plain, UNNORMALIZED)

    def test_propagate_covers_every_node(self):
        d = sparse_layered_graph()
        hists = propagate_histograms(d)
        assert set(hists) == {n.id for n in d.nodes}
        assert hists["i"] == {0: 1}

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            sink_histogram(chain_dag(2), "weird")

    def test_empty_histogram_apl(self):
        with pytest.raises(EmptyHistogram):
            apl(PathHistogram({}))


class TestFixtures:
    def test_sparse_layered(self):
        d = sparse_layered_graph()
        assert sink_histogram(d) == {1: 5, 2: 4}
        assert brute_force_histogram(d) == {1: 5, 2: 4}

    def test_residual_layered_merges(self):
        d = residual_layered_graph()
        hists = propagate_histograms(d, NORMALIZED)
        for node in ("l31", "l32", "l33"):
            assert hists[node] == {2: Fraction(1, 2), 3: Fraction(1, 2)}

    def test_skip_over_block(self):
        d = skip_over_block_graph()
        assert count_paths_dfs(d) == 257
        weights = sorted({w for _, w in enumerate_paths(d, NORMALIZED)})
        assert weights == [Fraction(1, 512), Fraction(1, 2)]
        assert dag_apl(d) == pytest.approx(1024 / 257, abs=1e-12)
        assert sink_histogram(d) == {0: 1, 4: 256}
        assert dag_napl(d) == 2


class TestOracle:
    def test_enumeration_cap(self):
        with pytest.raises(TooLarge):
            enumerate_paths(resblock_chain_dag(12), cap=100)

    def test_effective_lengths_of_explicit_paths(self):
        paths = enumerate_paths(sparse_layered_graph())
        assert len(paths) == 9
        assert all(w == 1 for _, w in paths)

    @settings(max_examples=200, deadline=None)
    @given(seeds)
    def test_dp_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        for d in (random_dag(rng), random_series_parallel_dag(rng)):
            for mode in (UNNORMALIZED, NORMALIZED):
                assert sink_histogram(d, mode) == brute_force_histogram(d, mode)

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_total_mass_is_path_count(self, seed):
        d = random_dag(np.random.default_rng(seed))
        assert sink_histogram(d).total == count_paths_dfs(d)

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_max_length_is_longest_active_path(self, seed):
        d = random_dag(np.random.default_rng(seed))
        assert max(sink_histogram(d).counts) == max_effective_depth(d)

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_relabeling_is_invariant(self, seed):
        d = random_series_parallel_dag(np.random.default_rng(seed))
        perm = np.random.default_rng(seed + 1).permutation(len(d.nodes))
        mapping = {n.id: f"z{int(p):03d}" for n, p in zip(d.nodes, perm)}
        r = d.relabel(mapping)
        for mode in (UNNORMALIZED, NORMALIZED):
            assert sink_histogram(r, mode) == sink_histogram(d, mode)

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(0, 50))
    def test_deactivating_a_node_never_raises_apl(self, seed, pick):
        d = random_dag(np.random.default_rng(seed), active_prob=0.8)
        on = [n.id for n in d.nodes if n.counts]
        if not on:
            return
        off = d.with_active({on[pick % len(on)]: False})
        assert dag_apl(off) <= dag_apl(d)

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_normalized_merge_mass_is_one_on_series_parallel(self, seed):
        d = random_series_parallel_dag(np.random.default_rng(seed))
        hists = propagate_histograms(d, NORMALIZED)
        for m in d.merges:
            assert hists[m.node].total == 1


class TestMasks:
    def test_enw_and_fraction(self):
        m = ActivationMask.from_strings(["1100", "1000", "1111"])
        assert enw(m) == 7 / 3
        assert active_fraction(m) == 7 / 12
        assert m.to_strings() == ["1100", "1000", "1111"]

    def test_empty(self):
        with pytest.raises(EmptyMask):
            enw(ActivationMask([]))
        with pytest.raises(EmptyMask):
            active_fraction(ActivationMask([[]]))


class TestIO:
    def test_round_trip(self, tmp_path):
        d = residual_layered_graph()
        path = tmp_path / "g.json"
        save_dag(d, path)
        back = load_dag(path)
        assert back == d
        assert sink_histogram(back, NORMALIZED) == sink_histogram(d, NORMALIZED)

    def test_dict_form(self):
        doc = dag_to_dict(diamond())
        assert doc["edges"][0] == {"src": "s", "dst": "a"}
        assert doc["merges"] == [{"node": "t", "branches": [["a"], ["b"]]}]
        assert dag_from_dict(doc) == diamond()

    def test_histogram_records_are_exact(self):
        h = PathHistogram({1: Fraction(1, 3), 2: Fraction(2, 3)}, NORMALIZED)
        assert PathHistogram.from_records(h.to_records()) == h

    def test_layered_dag_adds_sink_for_wide_last_layer(self):
        d = layered_dag([2], [[(1, 1), (1, 2)]], active={"l11"})
        assert d.sink == "o"
        assert sink_histogram(d) == {0: 1, 1: 1}
