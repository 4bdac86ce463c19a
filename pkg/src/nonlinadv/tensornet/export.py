"""Bridges from networks to path statistics.

Two independent routes produce the same histogram for dense networks:
``network_to_dag`` builds the explicit unit graph for the dynamic program,
and ``histogram_via_forward`` runs a modified forward pass in which every
linear map has unit weights and the leading axis carries the histogram.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch, UnsupportedLayer
from ..pathgraph import (
    ACTIVATION,
    NORMALIZED,
    PASSTHROUGH,
    UNNORMALIZED,
    ActivationMask,
    ComputationDag,
    DagNode,
    MergeAnnotation,
    PathHistogram,
)
from .layers import (
    AvgPool2d,
    BatchNorm,
    ChannelPReLU,
    Conv2d,
    Dense,
    Flatten,
    ReLU,
    ResidualBegin,
    ResidualEnd,
)

NEURON = "neuron"
CHANNEL = "channel"


def network_mask(net) -> ActivationMask:
    """Current activity of every activation site (ReLUs are always active)."""
    rows = []
    for layer in net.activation_layers():
        if isinstance(layer, ChannelPReLU):
            rows.append(layer.active)
        else:
            rows.append(np.ones(layer.channels, dtype=bool))
    return ActivationMask(rows)


def _check_mask(net, mask):
    if mask is None:
        return network_mask(net)
    sites = net.activation_layers()
    if mask.shape != [l.channels for l in sites]:
        raise ShapeMismatch(f"mask shape {mask.shape} does not match activation layers "
                            f"{[l.channels for l in sites]}")
    return mask


class _DagBuilder:
    def __init__(self):
        self.nodes = []
        self.edges = []
        self.edge_set = set()
        self.merges = []

    def add(self, nid, kind=PASSTHROUGH, active=False, layer=None):
        self.nodes.append(DagNode(nid, kind, bool(active), layer))
        return nid

    def link(self, a, b):
        if (a, b) not in self.edge_set:
            self.edge_set.add((a, b))
            self.edges.append((a, b))

    def build(self):
        """Dag restricted to units on some src->snk path; units cut off by
        sparse connectivity carry no paths and are dropped."""
        succ, pred = {}, {}
        for a, c in self.edges:
            succ.setdefault(a, []).append(c)
            pred.setdefault(c, []).append(a)
        keep = _reach("src", succ) & _reach("snk", pred)
        nodes = tuple(n for n in self.nodes if n.id in keep)
        edges = tuple((a, c) for a, c in self.edges if a in keep and c in keep)
        merges = tuple(
            MergeAnnotation(m.node, [[u for u in g if u in keep] for g in m.branches])
            for m in self.merges if m.node in keep
        )
        return ComputationDag(nodes, edges, "src", "snk", merges)


def _reach(start, adj):
    seen, stack = {start}, [start]
    while stack:
        for w in adj.get(stack.pop(), ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def network_to_dag(net, mask: ActivationMask | None = None, granularity: str = NEURON) -> ComputationDag:
    """Unit graph of the network's nonlinear structure.

    Input features/channels, linear outputs and residual sums become
    passthrough nodes; every activation unit becomes an activation node whose
    active flag comes from ``mask``. Residual sums carry a two-branch
    (main, skip) merge annotation.
    """
    if granularity not in (NEURON, CHANNEL):
        raise ValueError(f"unknown granularity {granularity!r}")
    mask = _check_mask(net, mask)
    b = _DagBuilder()
    b.add("src")
    shape = net.input_shape
    if len(shape) == 3 and granularity == NEURON:
        raise UnsupportedLayer("neuron granularity is only defined for dense inputs")
    front = [b.add(f"in_{i:04d}") for i in range(shape[0])]
    for nid in front:
        b.link("src", nid)
    stack = []
    act_idx = 0
    for li, layer in enumerate(net.layers):
        tag = f"L{li:03d}"
        if isinstance(layer, Dense):
            front = _linear_nodes(b, tag, front, layer.out_features, layer.connectivity)
        elif isinstance(layer, Conv2d):
            if granularity == NEURON:
                raise UnsupportedLayer("conv layers need channel granularity")
            front = _linear_nodes(b, tag, front, layer.out_channels, None)
        elif isinstance(layer, (ReLU, ChannelPReLU)):
            bits = mask.layers[act_idx]
            if len(front) != len(bits):
                raise ShapeMismatch("activation width does not match incoming units")
            new = []
            for c, src in enumerate(front):
                nid = b.add(f"{tag}_a{c:04d}", ACTIVATION, bits[c], act_idx)
                b.link(src, nid)
                new.append(nid)
            front = new
            act_idx += 1
        elif isinstance(layer, Flatten):
            if len(shape) == 3:
                if granularity == NEURON:
                    raise UnsupportedLayer("flatten of spatial maps needs channel granularity")
                hw = shape[1] * shape[2]
                front = [nid for nid in front for _ in range(hw)]
        elif isinstance(layer, (BatchNorm, AvgPool2d)):
            pass
        elif isinstance(layer, ResidualBegin):
            stack.append(front)
        elif isinstance(layer, ResidualEnd):
            skip = stack.pop()
            if layer.projection is not None:
                p = layer.projection
                width = p.out_features if isinstance(p, Dense) else p.out_channels
                skip = _linear_nodes(b, tag + "p", skip, width, getattr(p, "connectivity", None))
            if len(skip) != len(front):
                raise ShapeMismatch("skip and main branch widths differ")
            new = []
            for c, (m, s) in enumerate(zip(front, skip)):
                if m == s:
                    raise UnsupportedLayer("residual block with an empty main branch")
                nid = b.add(f"{tag}_m{c:04d}")
                b.link(m, nid)
                b.link(s, nid)
                b.merges.append(MergeAnnotation(nid, ((m,), (s,))))
                new.append(nid)
            front = new
        else:
            raise UnsupportedLayer(f"cannot export {type(layer).__name__}")
        if not isinstance(layer, (ResidualBegin, ResidualEnd)):
            shape = layer.output_shape(shape)
    b.add("snk")
    for nid in dict.fromkeys(front):
        b.link(nid, "snk")
    return b.build()


def _linear_nodes(b, tag, front, width, connectivity):
    new = []
    for j in range(width):
        nid = b.add(f"{tag}_l{j:04d}")
        if connectivity is None:
            srcs = front
        else:
            srcs = [front[i] for i in np.flatnonzero(connectivity[j])]
        for s in dict.fromkeys(srcs):
            b.link(s, nid)
        new.append(nid)
    return new


# -- forward-pass route --------------------------------------------------------

_SAFE_FLOAT = 2 ** 53


def histogram_via_forward(net, mask: ActivationMask | None = None, mode: str = UNNORMALIZED,
                          exact: bool = True) -> PathHistogram:
    """Path histogram at the output via a unit-weight forward pass.

    All linear weights are treated as 1 and biases as 0, normalization layers
    are skipped and pooling sums its window. The leading axis indexes path
    length; the input is seeded with (1, 0, ..., 0) at every input unit and
    each active activation unit shifts its histogram by one. With
    ``exact=False`` float64 is used and OverflowError is raised once counts
    exceed the range where floats hold integers exactly.
    """
    mask = _check_mask(net, mask)
    if mode not in (UNNORMALIZED, NORMALIZED):
        raise ValueError(f"unknown histogram mode {mode!r}")
    if not exact and mode == NORMALIZED:
        raise ValueError("normalized mode requires exact arithmetic")
    length = len(mask.layers) + 1
    if exact:
        one, zero, dtype = (Fraction(1) if mode == NORMALIZED else 1), 0, object
    else:
        one, zero, dtype = 1.0, 0.0, np.float64
    h = np.full((length,) + tuple(net.input_shape), zero, dtype=dtype)
    h[0] = one

    def guard(a):
        if not exact and np.max(a, initial=0.0) > _SAFE_FLOAT:
            raise OverflowError("path counts exceed float64 integer precision")
        return a

    stack = []
    act_idx = 0
    for layer in net.layers:
        if isinstance(layer, Dense):
            h = guard(_dense_ones(h, layer, dtype))
        elif isinstance(layer, Conv2d):
            h = guard(_conv_ones(h, layer))
        elif isinstance(layer, (ReLU, ChannelPReLU)):
            bits = mask.layers[act_idx]
            if h.shape[1] != len(bits):
                raise ShapeMismatch("activation width does not match incoming units")
            act_idx += 1
            if bits.any():
                shifted = np.full_like(h, zero)
                shifted[1:] = h[:-1]
                sel = np.asarray(bits)
                h = h.copy()
                h[:, sel] = shifted[:, sel]
        elif isinstance(layer, AvgPool2d):
            k = layer.kernel_size
            L, c, hh, ww = h.shape
            h = h.reshape(L, c, hh // k, k, ww // k, k).sum(axis=(3, 5))
        elif isinstance(layer, Flatten):
            h = h.reshape(h.shape[0], -1)
        elif isinstance(layer, BatchNorm):
            pass
        elif isinstance(layer, ResidualBegin):
            stack.append(h)
        elif isinstance(layer, ResidualEnd):
            skip = stack.pop()
            p = layer.projection
            if isinstance(p, Dense):
                skip = _dense_ones(skip, p, dtype)
            elif isinstance(p, Conv2d):
                skip = _conv_ones(skip, p)
            if skip.shape != h.shape:
                raise ShapeMismatch("skip and main branch shapes differ")
            if mode == NORMALIZED:
                h = (h / h.sum(axis=0) + skip / skip.sum(axis=0)) / 2
            else:
                h = guard(h + skip)
        else:
            raise UnsupportedLayer(f"cannot trace {type(layer).__name__}")
    totals = h.reshape(length, -1).sum(axis=1)
    if exact:
        counts = {i: totals[i] for i in range(length)}
    else:
        counts = {i: int(totals[i]) for i in range(length)}
    return PathHistogram(counts, mode)


def _dense_ones(h, layer, dtype):
    conn = layer.connectivity
    ones = np.ones((layer.out_features, layer.in_features), dtype=int) if conn is None else conn.astype(int)
    if dtype is object:
        ones = ones.astype(object)
    return h @ ones.T


def _conv_ones(h, layer):
    k, s, p = layer.kernel_size, layer.stride, layer.padding
    if p:
        h = np.pad(h, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=0)
    win = sliding_window_view(h, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    summed = win.sum(axis=(1, 4, 5))  # (L, Ho, Wo)
    return np.repeat(summed[:, None], layer.out_channels, axis=1)
