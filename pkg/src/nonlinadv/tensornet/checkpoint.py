"""Versioned ``.npz`` checkpoints holding every parameter, frozen mask and
batch-norm statistic, plus the architecture config needed to rebuild."""

from __future__ import annotations

import json

import numpy as np

from ..errors import InvalidSpec
from .layers import BatchNorm
from .network import build_network

FORMAT_VERSION = 1


def _arrays(net):
    out = {}
    for i, p in enumerate(net.params()):
        out[f"param_{i:04d}"] = p.value
        out[f"frozen_{i:04d}"] = p.frozen
    bns = [l for l in net.layers if isinstance(l, BatchNorm)]
    for i, bn in enumerate(bns):
        out[f"bn_mean_{i:04d}"] = bn.running_mean
        out[f"bn_var_{i:04d}"] = bn.running_var
    return out


def save_checkpoint(net, path, extra=None):
    if net.config is None:
        raise InvalidSpec("network has no architecture config; build it with build_network")
    meta = {"format_version": FORMAT_VERSION, "architecture": net.config,
            "prelu_sites": [type(l).__name__ for l in net.activation_layers()],
            "extra": extra or {}}
    arrays = _arrays(net)
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Rebuild a network from a checkpoint; returns (net, extra)."""
    from ..linearize import attach_prelus

    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise InvalidSpec(f"unsupported checkpoint version {meta.get('format_version')}")
        net = build_network(meta["architecture"])
        if any(s == "ChannelPReLU" for s in meta["prelu_sites"]):
            attach_prelus(net, 0.0, only=[s == "ChannelPReLU" for s in meta["prelu_sites"]])
        params = net.params()
        for i, p in enumerate(params):
            p.value[...] = data[f"param_{i:04d}"]
            p.frozen[...] = data[f"frozen_{i:04d}"]
        bns = [l for l in net.layers if isinstance(l, BatchNorm)]
        for i, bn in enumerate(bns):
            bn.running_mean = data[f"bn_mean_{i:04d}"].copy()
            bn.running_var = data[f"bn_var_{i:04d}"].copy()
    return net, meta["extra"]
