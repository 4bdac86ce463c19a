"""Re-training with transferred inactive-unit masks.

A mask extracted from a linearized network is re-applied to a freshly
initialized copy of the architecture, either as is, shuffled within each
layer, or shuffled across the whole network.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import EmptyMask, InvalidSpec, ShapeMismatch
from .linearize import attach_prelus, train_epoch
from .metrics import structure_metrics
from .pathgraph import ActivationMask, active_fraction, enw
from .records import fmt
from .tensornet.network import build_network
from .tensornet.optim import SGD, multistep_lr

EXACT = "exact"
LAYERWISE = "layerwise"
GLOBAL = "global"
MODES = (EXACT, LAYERWISE, GLOBAL)


def seeded_rng(seed, stream=None):
    """PCG64 generator; ``stream`` derives an independent substream."""
    key = [int(seed)] if stream is None else [int(seed), int(stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def extract_mask(state, net=None) -> ActivationMask:
    """1 for active units, 0 for frozen ones, one row per PReLU layer."""
    rows = [~state.frozen[sl] for sl in state.layer_slices()]
    if net is not None:
        sizes = [l.channels for l in net.prelu_layers()]
        if sizes != state.layer_sizes:
            raise ShapeMismatch(f"state layers {state.layer_sizes} do not match network {sizes}")
    return ActivationMask(rows)


def fisher_yates(bits, rng):
    """Uniform in-place-style shuffle; returns a new array."""
    out = np.array(bits, copy=True)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        out[i], out[j] = out[j], out[i]
    return out


def permute_mask(mask: ActivationMask, mode: str, rng) -> ActivationMask:
    if mask.total == 0:
        raise EmptyMask("cannot permute an empty mask")
    if mode == EXACT:
        return mask.copy()
    if mode == LAYERWISE:
        return ActivationMask([fisher_yates(l, rng) for l in mask.layers])
    if mode == GLOBAL:
        flat = fisher_yates(mask.flat(), rng)
        rows, start = [], 0
        for n in mask.shape:
            rows.append(flat[start:start + n])
            start += n
        return ActivationMask(rows)
    raise InvalidSpec(f"unknown permutation mode {mode!r}")


def apply_mask(net, mask: ActivationMask):
    """Freeze (slope 1) every PReLU unit whose mask bit is 0."""
    layers = net.prelu_layers()
    if mask.shape != [l.channels for l in layers]:
        raise ShapeMismatch(f"mask shape {mask.shape} does not match PReLU layout "
                            f"{[l.channels for l in layers]}")
    for layer, bits in zip(layers, mask.layers):
        off = ~bits
        if off.any():
            layer.deactivate(off)
    return net


def apply_mask_to_fresh(arch_config, mask: ActivationMask, rng=None):
    """Freshly initialized network with trainable zero-slope PReLUs on active
    units and frozen identity units where the mask is 0."""
    net = build_network(arch_config, rng)
    attach_prelus(net, 0.0)
    return apply_mask(net, mask)


def mask_digest(mask: ActivationMask) -> str:
    return hashlib.sha256("\n".join(mask.to_strings()).encode()).hexdigest()


def save_mask(mask: ActivationMask, path):
    doc = {"format_version": 1, "layers": mask.to_strings(), "sha256": mask_digest(mask)}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_mask(path) -> ActivationMask:
    doc = json.loads(Path(path).read_text())
    mask = ActivationMask.from_strings(doc["layers"])
    if doc.get("sha256") != mask_digest(mask):
        raise InvalidSpec(f"{path}: mask digest mismatch")
    return mask


def retrain(arch_config, mask, data, train, rng):
    """Train a fresh masked network with the full schedule; returns the network."""
    net = apply_mask_to_fresh(arch_config, mask, rng)
    opt = SGD(net.params(), train.lr, train.momentum, train.weight_decay)
    for e in range(train.epochs):
        lr = multistep_lr(e, train.lr, train.milestones, train.gamma)
        train_epoch(net, opt, data.x_train, data.y_train, lr, train.batch_size, rng)
    return net


def retrain_compare(baseline_mask, arch_config, data, train, modes=MODES, seeds=5,
                    master_seed=0, linearized_accuracy=None):
    """Retrain from scratch once per (mode, seed), reshuffling the mask per seed.

    Returns ``(rows, summary)``: one row per run and per-mode mean/std of the
    final test accuracy.
    """
    rows = []
    for mode in modes:
        for s in range(seeds):
            rng = seeded_rng(master_seed, 1000 * MODES.index(mode) + s)
            mask = permute_mask(baseline_mask, mode, rng)
            net = retrain(arch_config, mask, data, train, rng)
            m = structure_metrics(net)
            rows.append({"mode": mode, "seed": s,
                         "final_accuracy": net.accuracy(data.x_test, data.y_test),
                         "active_fraction": active_fraction(mask), "enw": enw(mask),
                         "napl": m["napl"]})
    summary = {"linearized_accuracy": linearized_accuracy, "shuffle": "once per seed", "modes": {}}
    for mode in modes:
        acc = np.array([r["final_accuracy"] for r in rows if r["mode"] == mode])
        summary["modes"][mode] = {"n": int(acc.size), "mean": float(acc.mean()),
                                  "std": float(acc.std(ddof=1)) if acc.size > 1 else 0.0}
    return rows, summary


TABLE_COLUMNS = ("mode", "seed", "final_accuracy", "active_fraction", "enw", "napl")


def comparison_csv(rows) -> str:
    lines = [",".join(TABLE_COLUMNS)]
    lines += [",".join(fmt(r[c]) for c in TABLE_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"
