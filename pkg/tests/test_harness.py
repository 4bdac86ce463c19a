import hashlib
import json
import sys

import numpy as np
import pytest

from nonlinadv.errors import InvalidSpec, NonFiniteLoss, OracleMismatch
from nonlinadv.harness import (
    ArchitectureSpec,
    DatasetSpec,
    ExperimentConfig,
    LinearizePhaseConfig,
    PhaseConfig,
    config_from_dict,
    desk_config,
    dump_config,
    emit_report,
    gen_dataset,
    load_config,
    load_csv,
    load_idx,
    oracle_check,
    run_experiment,
    sweep,
    write_idx,
)
from nonlinadv.harness.cli import main
from nonlinadv.harness.sweep import summarize
from nonlinadv.metrics import structure_metrics
from nonlinadv.pathgraph import PathHistogram
from nonlinadv.records import ExperimentRecord
from nonlinadv.tensornet import build_network, load_checkpoint
from nonlinadv.transfer import apply_mask, load_mask


def tiny_config(**changes):
    cfg = ExperimentConfig(
        name="tiny", seed=1,
        architecture=ArchitectureSpec(blocks=2, width=6),
        train=PhaseConfig(epochs=3, milestones=(2,), batch_size=32),
        linearize=LinearizePhaseConfig(epochs=3, milestones=None, batch_size=32, omega=0.05),
        dataset=DatasetSpec(classes=3, samples_per_class=50, seed=1),
    )
    return cfg.replace(**changes).validate()


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestDatasets:
    def test_deterministic(self):
        spec = DatasetSpec(classes=4, samples_per_class=30, noise=0.1, seed=3)
        a, b = gen_dataset(spec), gen_dataset(spec)
        for f in ("x_train", "y_train", "x_test", "y_test"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_balanced_and_disjoint(self):
        spec = DatasetSpec(classes=5, samples_per_class=40, seed=0)
        d = gen_dataset(spec)
        assert np.all(np.bincount(d.y_train) == 30) and np.all(np.bincount(d.y_test) == 10)
        rows = {tuple(r) for r in np.round(d.x_train, 12)}
        assert not any(tuple(r) in rows for r in np.round(d.x_test, 12))
        np.testing.assert_allclose(d.x_train.mean(axis=0), 0, atol=1e-12)

    def test_separated_blobs_are_linearly_separable(self):
        d = gen_dataset(DatasetSpec(kind="gaussian-blobs", classes=4, samples_per_class=100, overlap=0.0))
        # least-squares one-vs-rest linear classifier
        X = np.hstack([d.x_train, np.ones((len(d.x_train), 1))])
        W, *_ = np.linalg.lstsq(X, np.eye(4)[d.y_train], rcond=None)
        pred = (np.hstack([d.x_test, np.ones((len(d.x_test), 1))]) @ W).argmax(axis=1)
        assert (pred == d.y_test).mean() >= 0.99

    def test_csv_and_idx(self, tmp_path):
        (tmp_path / "d.csv").write_text("a,b,label\n1,2,0\n3,4,1\n5,6,1\n7,8,0\n")
        x, y = load_csv(tmp_path / "d.csv")
        assert x.shape == (4, 2) and list(y) == [0, 1, 1, 0]
        imgs = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
        write_idx(tmp_path / "x.idx", imgs)
        np.testing.assert_array_equal(load_idx(tmp_path / "x.idx"), imgs)
        (tmp_path / "bad.idx").write_bytes(b"\x01\x00\x08\x01\x00\x00\x00\x05")
        with pytest.raises(InvalidSpec):
            load_idx(tmp_path / "bad.idx")

    def test_idx_dataset(self, tmp_path):
        rng = np.random.default_rng(0)
        write_idx(tmp_path / "x.idx", rng.integers(0, 255, (20, 4, 4)).astype(np.uint8))
        write_idx(tmp_path / "y.idx", np.repeat(np.arange(2), 10).astype(np.uint8))
        d = gen_dataset(DatasetSpec(kind="idx-images", path=str(tmp_path / "x.idx"),
                                    label_path=str(tmp_path / "y.idx")))
        assert d.input_shape == (1, 4, 4) and d.classes == 2

    def test_invalid(self):
        with pytest.raises(InvalidSpec):
            gen_dataset(DatasetSpec(kind="imagenet"))
        with pytest.raises(InvalidSpec):
            gen_dataset(DatasetSpec(classes=1))
        with pytest.raises(InvalidSpec):
            gen_dataset(DatasetSpec(kind="csv-file"))


class TestConfig:
    def test_defaults_follow_training_regime(self):
        cfg = ExperimentConfig()
        assert (cfg.train.epochs, cfg.train.milestones, cfg.train.lr) == (200, (100, 150), 0.1)
        assert (cfg.linearize.epochs, cfg.linearize.milestones) == (60, (20, 40))

    def test_yaml_round_trip(self, tmp_path):
        cfg = tiny_config()
        (tmp_path / "c.yaml").write_text(dump_config(cfg))
        back = load_config(tmp_path / "c.yaml")
        assert back == cfg and back.digest() == cfg.digest()

    def test_validation(self):
        base = {"schema_version": 1}
        assert config_from_dict(base) == ExperimentConfig()
        for bad in ({}, {"schema_version": 2}, {**base, "colour": 1},
                    {**base, "train": {"lr": 0}}, {**base, "train": {"speed": 3}},
                    {**base, "train": {"milestones": [5, 3]}},
                    {**base, "linearize": {"omega": -1}},
                    {**base, "linearize_at_epoch": 500}):
            with pytest.raises(InvalidSpec):
                config_from_dict(bad)

    def test_replace_rejects_unknown_fields(self):
        with pytest.raises(InvalidSpec):
            tiny_config().replace(**{"train.nope": 1})


class TestExperiment:
    def test_zero_epochs_gives_initial_row_only(self):
        cfg = tiny_config(**{"train.epochs": 0, "train.milestones": (), "linearize.epochs": 0})
        rec = run_experiment(cfg).record
        assert len(rec.rows) == 1
        row = rec.rows[0]
        assert row["epoch"] == 0 and row["active_fraction"] == 1.0
        assert row["napl"] == 2

    @pytest.mark.parametrize("blocks", [1, 3, 5])
    def test_initial_napl_and_apl(self, blocks):
        cfg = tiny_config(**{"architecture.blocks": blocks, "train.epochs": 0,
                             "train.milestones": (), "linearize.epochs": 0})
        assert run_experiment(cfg).record.rows[0]["napl"] == blocks
        plain = cfg.replace(**{"architecture.residual": False})
        assert run_experiment(plain).record.rows[0]["apl"] == 2 * blocks

    def test_outputs_and_posthoc_recomputation(self, tmp_path):
        res = run_experiment(tiny_config(), out_dir=tmp_path)
        for name in ("metrics.csv", "manifest.json", "config.yaml", "checkpoint.npz",
                     "state.json", "mask.json"):
            assert (tmp_path / name).exists()
        rec = ExperimentRecord.from_csv((tmp_path / "metrics.csv").read_text())
        assert rec.column("epoch") == list(range(7))
        assert rec.column("phase") == ["init"] + ["train"] * 3 + ["linearize"] * 3
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["status"] == "ok" and manifest["neuron_crosscheck"] == "pass"
        # rebuild from architecture + saved mask and recompute the path metrics
        net, _ = load_checkpoint(tmp_path / "checkpoint.npz")
        fresh = build_network(net.config)
        from nonlinadv.linearize import attach_prelus
        attach_prelus(fresh, 0.0)
        apply_mask(fresh, load_mask(tmp_path / "mask.json"))
        m = structure_metrics(fresh)
        for key in ("apl", "napl", "enw", "active_fraction"):
            assert m[key] == res.record.last[key] == rec.last[key]

    def test_partial_record_flushed_on_failure(self, tmp_path):
        def boom(rec):
            if rec.last["epoch"] == 2:
                raise RuntimeError("interrupted")

        with pytest.raises(RuntimeError):
            run_experiment(tiny_config(), out_dir=tmp_path, on_epoch=boom)
        rec = ExperimentRecord.from_csv((tmp_path / "metrics.csv").read_text())
        assert rec.column("epoch") == [0, 1, 2]
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["status"] == "failed" and "interrupted" in manifest["error"]

    def test_reproducible(self, tmp_path):
        run_experiment(tiny_config(), out_dir=tmp_path / "a")
        run_experiment(tiny_config(), out_dir=tmp_path / "b")
        assert digest(tmp_path / "a" / "metrics.csv") == digest(tmp_path / "b" / "metrics.csv")

    def test_linearize_at_epoch_truncates_training(self):
        rec = run_experiment(tiny_config(linearize_at_epoch=1)).record
        assert rec.column("phase") == ["init", "train"] + ["linearize"] * 3

    def test_controller_report(self):
        rec = run_experiment(tiny_config(**{"linearize.target": 0.5})).record
        ctl = rec.manifest["controller"]
        assert ctl["target"] == 0.5 and isinstance(ctl["converged"], bool)


class TestSweep:
    def test_degenerate_start_grid_is_a_from_scratch_run(self):
        cfg = tiny_config()
        points, _ = sweep("linearize-at-epoch", [0], cfg)
        direct = run_experiment(cfg.replace(linearize_at_epoch=0, **{"linearize.target": 0.8}))
        assert points[0].record.to_csv() == direct.record.to_csv()

    def test_zero_omega_keeps_everything_active(self):
        _, rows = sweep("omega", [0.0, 0.2], tiny_config())
        assert rows[0]["final_active_fraction"] == 1.0
        assert rows[1]["final_active_fraction"] <= 1.0

    def test_failures_are_recorded(self, tmp_path, monkeypatch):
        real = run_experiment

        def flaky(cfg, out_dir=None):
            if cfg.architecture.blocks == 3:
                raise NonFiniteLoss("loss is nan")
            return real(cfg, out_dir=out_dir)

        monkeypatch.setattr(sys.modules["nonlinadv.harness.sweep"], "run_experiment", flaky)
        points, rows = sweep("depth", [1, 3, 2], tiny_config(), out_dir=tmp_path)
        assert [r["status"] for r in rows] == ["ok", "failed", "ok"]
        assert rows[1]["error"] == "NonFiniteLoss: loss is nan"
        assert (tmp_path / "summary.csv").read_text().count("\n") == 4

    def test_invalid_grid_value_fails_fast(self):
        with pytest.raises(InvalidSpec):
            sweep("depth", [1, -1], tiny_config())

    def test_fully_linearized_point(self):
        _, rows = sweep("omega", [1e300], tiny_config())
        assert rows[0]["final_active_fraction"] == 0.0
        assert rows[0]["inverse_active_fraction"] == float("inf")

    def test_summary_is_pure(self):
        points, rows = sweep("width", [0.5, 1.0], tiny_config())
        assert summarize(points) == rows
        assert rows[0]["inverse_active_fraction"] == 1 / rows[0]["final_active_fraction"]

    def test_per_point_omega_override(self):
        points, rows = sweep("linearize-at-epoch", [0, 2], tiny_config(), omega_overrides={2: 0.0})
        assert rows[1]["final_active_fraction"] == 1.0

    @pytest.mark.slow
    def test_width_keeps_a_constant_core(self):
        # fixed free-running weight: the number of active units per layer
        # stays put while the active fraction drops with width
        cfg = desk_config(seed=0, **{"linearize.omega": 0.02})
        _, rows = sweep("width", [0.5, 1, 2], cfg)
        widths = np.array([r["final_enw"] for r in rows])
        assert np.all(np.abs(widths / widths.mean() - 1) <= 0.25)
        fracs = [r["final_active_fraction"] for r in rows]
        assert fracs[0] > fracs[1] > fracs[2]

    def test_bad_sweeps(self):
        with pytest.raises(InvalidSpec):
            sweep("omega", [], tiny_config())
        with pytest.raises(InvalidSpec):
            sweep("colour", [1], tiny_config())


class TestReport:
    def _records(self):
        return [run_experiment(tiny_config(seed=s)).record for s in (1, 2)]

    def test_empty_is_an_error(self, tmp_path):
        with pytest.raises(InvalidSpec):
            emit_report([], tmp_path / "r")
        assert not (tmp_path / "r").exists()

    def test_rows_and_determinism(self, tmp_path):
        recs = self._records()
        a = emit_report(recs[:1], tmp_path / "a")
        b = emit_report(recs[:1], tmp_path / "b")
        csv = (tmp_path / "a" / "metrics_00.csv").read_text().splitlines()
        assert len(csv) - 1 == len(recs[0].rows)
        assert [digest(p) for p in a] == [digest(p) for p in b]
        svg = (tmp_path / "a" / "napl_vs_epoch.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg

    def test_summary_charts(self, tmp_path):
        points, rows = sweep("omega", [0.0, 0.1], tiny_config())
        files = emit_report([p.record for p in points], tmp_path, summary_rows=rows)
        assert {p.name for p in files} >= {"final_test_acc_vs_value.svg", "final_napl_vs_value.svg"}


class TestOracleCheck:
    def test_passes(self):
        r = oracle_check(100, 14, seed=3)
        assert r["status"] == "pass" and r["comparisons"] == 400
        assert r["fixtures"]["sparse_layered"] == [{"length": 1, "count": "5"},
                                                  {"length": 2, "count": "4"}]

    def test_reports_counterexample(self):
        def off_by_one(dag, mode):
            from nonlinadv.pathgraph import sink_histogram
            h = sink_histogram(dag, mode)
            return PathHistogram({k + 1: v for k, v in h.counts.items()}, mode)

        with pytest.raises(OracleMismatch) as info:
            oracle_check(5, dp=off_by_one)
        assert "nodes" in info.value.counterexample["dag"]

    def test_bad_arguments(self):
        with pytest.raises(InvalidSpec):
            oracle_check(0)


class TestCli:
    def _cfg(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(dump_config(tiny_config()))
        return str(path)

    def test_run_and_analyze(self, tmp_path, capsys):
        cfg = self._cfg(tmp_path)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
        capsys.readouterr()
        assert main(["analyze", str(tmp_path / "r" / "checkpoint.npz")]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert {"apl", "napl", "enw", "unnormalized_histogram"} <= set(doc)

    def test_train_then_linearize(self, tmp_path):
        cfg = self._cfg(tmp_path)
        assert main(["train", "--config", cfg, "--out", str(tmp_path / "t")]) == 0
        assert main(["linearize", "--config", cfg, "--checkpoint", str(tmp_path / "t" / "checkpoint.npz"),
                     "--out", str(tmp_path / "l")]) == 0
        rec = ExperimentRecord.from_csv((tmp_path / "l" / "metrics.csv").read_text())
        assert rec.column("epoch") == [3, 4, 5, 6]

    def test_analyze_graph_file(self, tmp_path, capsys):
        from nonlinadv.pathgraph import save_dag
        from nonlinadv.pathgraph.fixtures import sparse_layered_graph
        save_dag(sparse_layered_graph(), tmp_path / "g.json")
        assert main(["analyze", str(tmp_path / "g.json")]) == 0
        assert json.loads(capsys.readouterr().out)["apl"] == 13 / 9

    def test_sweep_report_and_permute(self, tmp_path):
        cfg = self._cfg(tmp_path)
        assert main(["sweep", "--config", cfg, "--kind", "omega", "--grid", "0,0.1",
                     "--out", str(tmp_path / "s")]) == 0
        assert main(["report", str(tmp_path / "s"), "--out", str(tmp_path / "rep"),
                     "--format", "svg"]) == 0
        assert (tmp_path / "rep" / "napl_vs_epoch.svg").exists()
        run = next(p for p in (tmp_path / "s").iterdir() if p.is_dir())
        assert main(["permute-retrain", "--config", cfg, "--mask", str(run / "mask.json"),
                     "--seeds", "1", "--out", str(tmp_path / "p")]) == 0
        assert (tmp_path / "p" / "permute_retrain.csv").exists()

    def test_exit_codes(self, tmp_path, monkeypatch):
        assert main(["oracle-check", "--trials", "10"]) == 0
        assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
        (tmp_path / "bad.yaml").write_text("schema_version: 9\n")
        assert main(["run", "--config", str(tmp_path / "bad.yaml")]) == 1
        with pytest.raises(SystemExit) as info:
            main(["sweep", "--kind", "colour", "--grid", "1"])
        assert info.value.code == 1

        def broken(*a, **k):
            raise OracleMismatch("forced", counterexample={"x": 1})

        monkeypatch.setattr("nonlinadv.harness.cli.oracle_check", broken)
        assert main(["oracle-check"]) == 3

        def crash(*a, **k):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr("nonlinadv.harness.cli.run_experiment", crash)
        assert main(["run"]) == 2
