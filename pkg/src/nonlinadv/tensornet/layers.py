"""Layers with hand-written forward and backward passes.

Activations are laid out channel-first: ``(N, C)`` for dense features and
``(N, C, H, W)`` for images. Every layer caches what its backward pass needs
during ``forward``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import GraphStateError, ShapeMismatch


class Parameter:
    """A trainable array with its gradient and an elementwise frozen mask."""

    def __init__(self, value, name=""):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.frozen = np.zeros(self.value.shape, dtype=bool)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    @property
    def fully_frozen(self):
        return bool(self.frozen.all())

    def freeze(self, index=...):
        self.frozen[index] = True

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, frozen={int(self.frozen.sum())})"


def kaiming(rng, shape, fan_in):
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def _channel_shape(x, channels):
    if x.ndim < 2 or x.shape[1] != channels:
        raise ShapeMismatch(f"expected {channels} channels on axis 1, got shape {x.shape}")
    return (1, channels) + (1,) * (x.ndim - 2)


def prelu_apply(x, slopes):
    """y = x where x >= 0, slope[c] * x elsewhere; channel axis is 1."""
    slopes = np.asarray(slopes, dtype=np.float64)
    s = slopes.reshape(_channel_shape(x, slopes.size))
    return np.where(x >= 0, x, s * x)


def prelu_backward(x, slopes, upstream):
    """Gradients of :func:`prelu_apply` w.r.t. input and slopes.

    At x == 0 the positive branch is used.
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    if upstream.shape != x.shape:
        raise ShapeMismatch(f"upstream {upstream.shape} does not match input {x.shape}")
    s = slopes.reshape(_channel_shape(x, slopes.size))
    pos = x >= 0
    grad_x = np.where(pos, upstream, s * upstream)
    axes = (0,) + tuple(range(2, x.ndim))
    grad_s = (upstream * np.where(pos, 0.0, x)).sum(axis=axes)
    return grad_x, grad_s


class Layer:
    def params(self):
        return []

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def output_shape(self, shape):
        return shape

    def _cached(self):
        if getattr(self, "_x", None) is None:
            raise GraphStateError(f"{type(self).__name__}.backward called before forward")
        return self._x


class Dense(Layer):
    def __init__(self, in_features, out_features, rng=None, connectivity=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(kaiming(rng, (out_features, in_features), in_features), "weight")
        self.bias = Parameter(np.zeros(out_features), "bias")
        if connectivity is not None:
            connectivity = np.asarray(connectivity, dtype=bool)
            if connectivity.shape != (out_features, in_features):
                raise ShapeMismatch("connectivity must have shape (out, in)")
            self.weight.value *= connectivity
        self.connectivity = connectivity
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def _w(self):
        if self.connectivity is None:
            return self.weight.value
        return self.weight.value * self.connectivity

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(f"Dense expects (N, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self._w().T + self.bias.value

    def backward(self, grad):
        x = self._cached()
        gw = grad.T @ x
        if self.connectivity is not None:
            gw = gw * self.connectivity
        self.weight.grad += gw
        self.bias.grad += grad.sum(axis=0)
        return grad @ self._w()

    def output_shape(self, shape):
        return (self.out_features,)


class Conv2d(Layer):
    """Direct 2D convolution (cross-correlation) with zero padding."""

    def __init__(self, in_channels, out_channels, kernel_size=3, stride=1, padding=0,
                 rng=None, bias=True):
        if stride not in (1, 2):
            raise ValueError("stride must be 1 or 2")
        rng = np.random.default_rng(0) if rng is None else rng
        k = kernel_size
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride, self.padding = k, stride, padding
        fan_in = in_channels * k * k
        self.weight = Parameter(kaiming(rng, (out_channels, in_channels, k, k), fan_in), "weight")
        self.bias = Parameter(np.zeros(out_channels), "bias") if bias else None
        self._x = None

    def params(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def output_shape(self, shape):
        c, h, w = shape
        k, s, p = self.kernel_size, self.stride, self.padding
        return (self.out_channels, (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)

    def _cols(self, x):
        p, s, k = self.padding, self.stride, self.kernel_size
        if p:
            x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        # (N, C, Ho, Wo, k, k) -> (N, Ho, Wo, C*k*k)
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(win.shape[0], win.shape[2], win.shape[3], -1)

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(f"Conv2d expects (N, {self.in_channels}, H, W), got {x.shape}")
        self._x = x
        cols = self._cols(x)
        out = cols @ self.weight.value.reshape(self.out_channels, -1).T
        if self.bias is not None:
            out = out + self.bias.value
        return out.transpose(0, 3, 1, 2)

    def backward(self, grad):
        x = self._cached()
        n, _, ho, wo = grad.shape
        k, s, p = self.kernel_size, self.stride, self.padding
        g = grad.transpose(0, 2, 3, 1)  # (N, Ho, Wo, O)
        cols = self._cols(x)
        self.weight.grad += np.tensordot(g, cols, axes=([0, 1, 2], [0, 1, 2])).reshape(self.weight.shape)
        if self.bias is not None:
            self.bias.grad += g.sum(axis=(0, 1, 2))
        dcols = (g @ self.weight.value.reshape(self.out_channels, -1)).reshape(n, ho, wo, self.in_channels, k, k)
        dxp = np.zeros((n, self.in_channels, x.shape[2] + 2 * p, x.shape[3] + 2 * p))
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        if p:
            dxp = dxp[:, :, p:-p, p:-p]
        return dxp


class ReLU(Layer):
    """Activation-site placeholder; computes exactly what a zero-slope PReLU does."""

    def __init__(self, channels=None):
        self.channels = channels
        self._x = None

    def forward(self, x, train=False):
        self._x = x
        return np.where(x >= 0, x, 0.0 * x)

    def backward(self, grad):
        x = self._cached()
        return np.where(x >= 0, grad, 0.0 * grad)


class ChannelPReLU(Layer):
    """PReLU with one slope per channel.

    A channel is inactive once its slope is frozen; inactive slopes are
    exactly 1, so the channel is the identity.
    """

    def __init__(self, channels, init_slope=0.0):
        self.channels = channels
        self.slopes = Parameter(np.full(channels, float(init_slope)), "slopes")
        self._x = None

    @property
    def active(self):
        return ~self.slopes.frozen

    def deactivate(self, index):
        self.slopes.value[index] = 1.0
        self.slopes.freeze(index)

    def params(self):
        return [self.slopes]

    def forward(self, x, train=False):
        self._x = x
        return prelu_apply(x, self.slopes.value)

    def backward(self, grad):
        gx, gs = prelu_backward(self._cached(), self.slopes.value, grad)
        self.slopes.grad += gs
        return gx


class BatchNorm(Layer):
    def __init__(self, channels, eps=1e-5, momentum=0.1):
        self.channels = channels
        self.eps, self.momentum = eps, momentum
        self.gamma = Parameter(np.ones(channels), "gamma")
        self.beta = Parameter(np.zeros(channels), "beta")
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._x = None

    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x, train=False):
        shape = _channel_shape(x, self.channels)
        axes = (0,) + tuple(range(2, x.ndim))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = x.size // self.channels
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            unbiased = var * m / max(m - 1, 1)
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(shape)) * inv.reshape(shape)
        self._x = x
        self._cache = (xhat, inv, train, axes, shape)
        return self.gamma.value.reshape(shape) * xhat + self.beta.value.reshape(shape)

    def backward(self, grad):
        self._cached()
        xhat, inv, train, axes, shape = self._cache
        self.gamma.grad += (grad * xhat).sum(axis=axes)
        self.beta.grad += grad.sum(axis=axes)
        gxhat = grad * self.gamma.value.reshape(shape)
        if not train:
            return gxhat * inv.reshape(shape)
        m = grad.size // self.channels
        return (inv.reshape(shape) / m) * (
            m * gxhat
            - gxhat.sum(axis=axes).reshape(shape)
            - xhat * (gxhat * xhat).sum(axis=axes).reshape(shape)
        )


class AvgPool2d(Layer):
    """Non-overlapping average pooling with window = stride = ``kernel_size``."""

    def __init__(self, kernel_size):
        self.kernel_size = kernel_size
        self._x = None

    def output_shape(self, shape):
        c, h, w = shape
        k = self.kernel_size
        return (c, h // k, w // k)

    def forward(self, x, train=False):
        k = self.kernel_size
        n, c, h, w = x.shape
        if h % k or w % k:
            raise ShapeMismatch(f"pool size {k} does not divide {h}x{w}")
        self._x = x
        return x.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(self, grad):
        x = self._cached()
        k = self.kernel_size
        g = np.repeat(np.repeat(grad, k, axis=2), k, axis=3) / (k * k)
        return g.reshape(x.shape)


class Flatten(Layer):
    def __init__(self):
        self._x = None

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, train=False):
        self._x = x
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cached().shape)


class ResidualBegin(Layer):
    """Marks the start of a residual block; the network keeps the skip input."""

    def forward(self, x, train=False):
        return x

    def backward(self, grad):
        return grad


class ResidualEnd(Layer):
    """Adds the skip input (optionally projected) to the main-branch output."""

    def __init__(self, projection=None):
        self.projection = projection

    def params(self):
        return self.projection.params() if self.projection is not None else []

    def forward(self, x, train=False):
        return x

    def backward(self, grad):
        return grad


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n
