"""Single experiment runs: conventional training, then linearization.

The network is trained with ReLUs and then linearized in a separate phase
with a fresh learning-rate schedule. With ``linearize_at_epoch = s`` the
training phase is cut short after its first ``s`` epochs (learning rates as
in the full schedule) and the linearization phase starts from there, so every
start epoch gets the same post-activation budget.
"""

from __future__ import annotations

import json
import logging
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import OracleMismatch
from ..linearize import (
    STOPPED,
    LinearizationState,
    linearization_run,
    metrics_row,
    train_epoch,
)
from ..metrics import structure_metrics
from ..pathgraph import UNNORMALIZED, sink_histogram
from ..records import ExperimentRecord
from ..tensornet.checkpoint import load_checkpoint, save_checkpoint
from ..tensornet.export import NEURON, histogram_via_forward, network_to_dag
from ..tensornet.network import build_network
from ..tensornet.optim import SGD, multistep_lr
from ..transfer import extract_mask, save_mask, seeded_rng
from .config import ExperimentConfig, dump_config
from .datasets import gen_dataset

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    record: ExperimentRecord
    net: object
    state: LinearizationState
    data: object


def _manifest(config: ExperimentConfig):
    return {"name": config.name, "config_digest": config.digest(), "seed": config.seed,
            "tool_version": __version__, "numpy_version": np.__version__,
            "python_version": platform.python_version(), "status": "running"}


def initial_row(net, data, lr):
    """Epoch-0 metrics of the untrained network."""
    loss, logits = net.forward_loss(data.x_train, data.y_train, train=False)
    acc = float((logits.argmax(axis=1) == data.y_train).mean())
    return metrics_row(net, data, 0, "init", lr, loss, acc, 0.0)


def train_phase(net, data, phase, rng, record, epoch_offset=0, stop_after=None, on_epoch=None):
    """Conventional training with a multistep schedule, optionally stopping
    after the first ``stop_after`` epochs of it."""
    opt = SGD(net.params(), phase.lr, phase.momentum, phase.weight_decay)
    epochs = phase.epochs if stop_after is None else min(stop_after, phase.epochs)
    for e in range(epochs):
        lr = multistep_lr(e, phase.lr, phase.milestones, phase.gamma)
        epoch = epoch_offset + e + 1
        loss, acc = train_epoch(net, opt, data.x_train, data.y_train, lr, phase.batch_size, rng)
        record.add(**metrics_row(net, data, epoch, "train", lr, loss, acc, 0.0))
        if on_epoch is not None:
            on_epoch(record)
    return epochs


def neuron_crosscheck(net, row):
    """Recompute the last row's path metrics at neuron granularity and via
    the unit-weight forward pass; raises OracleMismatch on disagreement."""
    m = structure_metrics(net, granularity=NEURON)
    for key in ("apl", "napl", "enw", "active_fraction"):
        if m[key] != row[key]:
            raise OracleMismatch(f"{key}: channel {row[key]!r} vs neuron {m[key]!r}")
    dag = network_to_dag(net, granularity=NEURON)
    dp = sink_histogram(dag, UNNORMALIZED)
    fw = histogram_via_forward(net, mode=UNNORMALIZED)
    if dp != fw:
        raise OracleMismatch("forward-pass histogram differs from the graph DP",
                             counterexample={"dp": dp.to_records(), "forward": fw.to_records()})
    return "pass"


def controller_report(state, reg_config):
    if reg_config.target is None:
        return None
    f = state.inactive_fraction
    ok = state.phase == STOPPED and abs(f - reg_config.target) <= reg_config.band + 1e-12
    if not ok:
        log.warning("controller did not converge: inactive fraction %.4f, target %.2f",
                    f, reg_config.target)
    return {"target": reg_config.target, "final_inactive_fraction": f, "converged": ok,
            "final_omega": state.omega, "phase": state.phase}


def write_outputs(out_dir, config, record, net=None, state=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record.write_csv(out / "metrics.csv")
    (out / "config.yaml").write_text(dump_config(config))
    if net is not None:
        save_checkpoint(net, out / "checkpoint.npz",
                        extra={"epoch": record.last["epoch"] if record.rows else 0})
    if state is not None:
        (out / "state.json").write_text(json.dumps(state.to_dict()) + "\n")
        if state.layer_sizes:
            save_mask(extract_mask(state), out / "mask.json")
    (out / "manifest.json").write_text(json.dumps(record.manifest, indent=1, sort_keys=True) + "\n")


def run_experiment(config: ExperimentConfig, out_dir=None, data=None, on_epoch=None) -> RunResult:
    """Run both phases; writes metrics.csv, manifest.json, config.yaml,
    checkpoint.npz, state.json and mask.json into ``out_dir`` if given.

    On failure the partial record and a failed manifest are flushed before
    the exception propagates.
    """
    config.validate()
    out_dir = out_dir if out_dir is not None else config.out_dir
    t0 = time.perf_counter()
    rng = seeded_rng(config.seed)
    data = gen_dataset(config.dataset) if data is None else data
    arch = config.architecture.build_config(data.input_shape, data.classes)
    record = ExperimentRecord(manifest=_manifest(config))
    net = state = None
    reg_config = config.linearize.regularizer()
    try:
        net = build_network(arch, rng)
        record.add(**initial_row(net, data, config.train.lr))
        done = train_phase(net, data, config.train, rng, record,
                           stop_after=config.linearize_at_epoch, on_epoch=on_epoch)
        net, state, record = linearization_run(
            net, config.linearize.to_linearize_config(), data, rng, record=record,
            epoch_offset=done, on_epoch=on_epoch)
        record.manifest["controller"] = controller_report(state, reg_config)
        if len(net.input_shape) == 1:
            record.manifest["neuron_crosscheck"] = neuron_crosscheck(net, record.last)
        record.manifest["status"] = "ok"
    except BaseException as exc:
        record.manifest["status"] = "failed"
        record.manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        record.manifest["wall_time_s"] = time.perf_counter() - t0
        if out_dir is not None:
            ok = record.manifest["status"] == "ok"
            write_outputs(out_dir, config, record, net if ok else None, state if ok else None)
    return RunResult(record, net, state, data)


def run_train_only(config: ExperimentConfig, out_dir=None) -> RunResult:
    """Conventional training phase only (ReLU network)."""
    config = config.replace(**{"linearize.epochs": 0})
    config.validate()
    t0 = time.perf_counter()
    rng = seeded_rng(config.seed)
    data = gen_dataset(config.dataset)
    net = build_network(config.architecture.build_config(data.input_shape, data.classes), rng)
    record = ExperimentRecord(manifest=_manifest(config))
    record.add(**initial_row(net, data, config.train.lr))
    train_phase(net, data, config.train, rng, record)
    record.manifest.update(status="ok", wall_time_s=time.perf_counter() - t0)
    if out_dir is not None:
        write_outputs(out_dir, config, record, net)
    return RunResult(record, net, None, data)


def run_linearize_only(config: ExperimentConfig, checkpoint, out_dir=None) -> RunResult:
    """Linearization phase on a saved network. Uses rng stream 1 of the seed."""
    config.validate()
    t0 = time.perf_counter()
    net, extra = load_checkpoint(checkpoint)
    data = gen_dataset(config.dataset)
    record = ExperimentRecord(manifest=_manifest(config))
    record.manifest["checkpoint"] = str(checkpoint)
    start = int(extra.get("epoch", 0))
    loss, logits = net.forward_loss(data.x_train, data.y_train, train=False)
    acc = float((logits.argmax(axis=1) == data.y_train).mean())
    record.add(**metrics_row(net, data, start, "loaded", config.linearize.lr, loss, acc, 0.0))
    net, state, record = linearization_run(net, config.linearize.to_linearize_config(), data,
                                           seeded_rng(config.seed, 1), record=record,
                                           epoch_offset=start)
    record.manifest["controller"] = controller_report(state, config.linearize.regularizer())
    record.manifest.update(status="ok", wall_time_s=time.perf_counter() - t0)
    if out_dir is not None:
        write_outputs(out_dir, config, record, net, state)
    return RunResult(record, net, state, data)
