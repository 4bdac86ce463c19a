"""Sequential networks with residual blocks, built from a plain-dict config."""

from __future__ import annotations

import copy

import numpy as np

from ..errors import GraphStateError, InvalidSpec, NonFiniteLoss, ShapeMismatch
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
    softmax_cross_entropy,
)


class Network:
    """An ordered layer list; ResidualBegin/End pairs delimit skip connections."""

    def __init__(self, layers, input_shape, config=None):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.config = config
        self._dlogits = None
        depth = 0
        for layer in self.layers:
            if isinstance(layer, ResidualBegin):
                depth += 1
            elif isinstance(layer, ResidualEnd):
                depth -= 1
                if depth < 0:
                    raise InvalidSpec("ResidualEnd without matching ResidualBegin")
        if depth:
            raise InvalidSpec("unclosed ResidualBegin")

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def activation_layers(self):
        """Activation sites in order: ReLU placeholders and channel PReLUs."""
        return [l for l in self.layers if isinstance(l, (ReLU, ChannelPReLU))]

    def prelu_layers(self):
        return [l for l in self.layers if isinstance(l, ChannelPReLU)]

    def num_parameters(self):
        return sum(p.size for p in self.params())

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"network expects inputs of shape {self.input_shape}, got {x.shape[1:]}")
        skips = []
        for layer in self.layers:
            if isinstance(layer, ResidualBegin):
                skips.append(x)
            elif isinstance(layer, ResidualEnd):
                s = skips.pop()
                if layer.projection is not None:
                    s = layer.projection.forward(s, train)
                if s.shape != x.shape:
                    raise ShapeMismatch(f"skip shape {s.shape} does not match main branch {x.shape}")
                x = x + s
            else:
                x = layer.forward(x, train)
        return x

    def forward_loss(self, x, labels, train=True):
        logits = self.forward(x, train)
        labels = np.asarray(labels)
        if labels.shape != (logits.shape[0],):
            raise ShapeMismatch("one label per sample expected")
        if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
            raise ShapeMismatch("labels outside [0, classes)")
        loss, self._dlogits = softmax_cross_entropy(logits, labels)
        if not np.isfinite(loss):
            self._dlogits = None
            raise NonFiniteLoss(f"loss is {loss}")
        return float(loss), logits

    def backward(self, grad=None):
        """Backpropagate; uses the loss gradient from the last forward_loss
        unless an explicit output gradient is passed."""
        if grad is None:
            if self._dlogits is None:
                raise GraphStateError("backward called without forward_loss")
            grad = self._dlogits
            self._dlogits = None
        skip_grads = []
        for layer in reversed(self.layers):
            if isinstance(layer, ResidualEnd):
                g = layer.projection.backward(grad) if layer.projection is not None else grad
                skip_grads.append(g)
            elif isinstance(layer, ResidualBegin):
                grad = grad + skip_grads.pop()
            else:
                grad = layer.backward(grad)
        for p in self.params():
            p.grad[p.frozen] = 0.0
        return grad

    def predict(self, x, batch_size=1024):
        out = [self.forward(x[i:i + batch_size]).argmax(axis=1) for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros(0, int)

    def accuracy(self, x, y):
        return float((self.predict(x) == y).mean()) if len(y) else float("nan")

    def clone(self):
        return copy.deepcopy(self)


# -- construction from config ------------------------------------------------

def build_network(config, rng=None):
    """Instantiate a network from an architecture dict.

    ``config = {"input_shape": [...], "layers": [...]}``; layer entries are
    dicts with a ``type`` of dense, conv, relu, prelu, batchnorm, avgpool,
    flatten or residual (with a nested ``body`` list and optional
    ``projection`` flag).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if "input_shape" not in config or "layers" not in config:
        raise InvalidSpec("architecture needs input_shape and layers")
    layers = []
    shape = _build(config["layers"], tuple(config["input_shape"]), rng, layers)
    if len(shape) != 1:
        raise InvalidSpec("network output must be a flat logit vector")
    return Network(layers, config["input_shape"], copy.deepcopy(config))


def _build(specs, shape, rng, out):
    for spec in specs:
        kind = spec.get("type")
        if kind == "dense":
            if len(shape) != 1:
                raise InvalidSpec("dense layer needs flat input; add a flatten layer")
            conn = spec.get("connectivity")
            layer = Dense(shape[0], int(spec["units"]), rng, connectivity=conn)
        elif kind == "conv":
            if len(shape) != 3:
                raise InvalidSpec("conv layer needs (C, H, W) input")
            layer = Conv2d(shape[0], int(spec["channels"]), int(spec.get("kernel", 3)),
                           int(spec.get("stride", 1)), int(spec.get("padding", 0)), rng,
                           bias=bool(spec.get("bias", True)))
        elif kind == "relu":
            layer = ReLU(shape[0])
        elif kind == "prelu":
            layer = ChannelPReLU(shape[0], float(spec.get("init_slope", 0.0)))
        elif kind == "batchnorm":
            layer = BatchNorm(shape[0], float(spec.get("eps", 1e-5)), float(spec.get("momentum", 0.1)))
        elif kind == "avgpool":
            layer = AvgPool2d(int(spec["kernel"]))
        elif kind == "flatten":
            layer = Flatten()
        elif kind == "residual":
            out.append(ResidualBegin())
            in_shape = shape
            shape = _build(spec["body"], shape, rng, out)
            proj = None
            if spec.get("projection") or shape != in_shape:
                proj = _projection(in_shape, shape, rng)
            out.append(ResidualEnd(proj))
            continue
        else:
            raise InvalidSpec(f"unknown layer type {kind!r}")
        shape = layer.output_shape(shape)
        out.append(layer)
    return shape


def _projection(in_shape, out_shape, rng):
    if len(in_shape) == 1 and len(out_shape) == 1:
        return Dense(in_shape[0], out_shape[0], rng)
    if len(in_shape) == 3 and len(out_shape) == 3:
        stride = in_shape[1] // out_shape[1]
        return Conv2d(in_shape[0], out_shape[0], 1, stride, 0, rng, bias=False)
    raise InvalidSpec(f"cannot project skip from {in_shape} to {out_shape}")


def dense_resnet_config(in_features, classes, width=16, blocks=4, residual=True,
                        activation="relu", width_factor=1.0, batchnorm=True):
    """Dense analogue of a pre-activation ResNet.

    stem Dense -> ``blocks`` x [BN -> act -> Dense -> BN -> act -> Dense (+ identity)]
    -> head Dense. With residual=False the skips are dropped and the net is a
    plain stack.
    """
    w = max(1, int(round(width * width_factor)))
    act = {"type": activation}
    bn = [{"type": "batchnorm"}] if batchnorm else []
    body = (bn + [act, {"type": "dense", "units": w}] + [dict(b) for b in bn]
            + [dict(act), {"type": "dense", "units": w}])
    layers = [{"type": "dense", "units": w}]
    for _ in range(blocks):
        if residual:
            layers.append({"type": "residual", "body": copy.deepcopy(body)})
        else:
            layers += copy.deepcopy(body)
    layers.append({"type": "dense", "units": classes})
    return {"input_shape": [in_features], "layers": layers}


def conv_resnet_config(in_channels, size, classes, width=8, blocks=2, residual=True,
                       activation="relu"):
    """Small conv pre-activation ResNet: conv stem, BN-act-conv blocks, pool, head."""
    act = {"type": activation}
    body = [{"type": "batchnorm"}, act, {"type": "conv", "channels": width, "padding": 1},
            {"type": "batchnorm"}, dict(act), {"type": "conv", "channels": width, "padding": 1}]
    layers = [{"type": "conv", "channels": width, "padding": 1}]
    for _ in range(blocks):
        if residual:
            layers.append({"type": "residual", "body": copy.deepcopy(body)})
        else:
            layers += copy.deepcopy(body)
    layers += [{"type": "batchnorm"}, dict(act), {"type": "avgpool", "kernel": size},
               {"type": "flatten"}, {"type": "dense", "units": classes}]
    return {"input_shape": [in_channels, size, size], "layers": layers}
