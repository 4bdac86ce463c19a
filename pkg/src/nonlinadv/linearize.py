"""Channel-wise PReLU linearization.

Each activation channel gets a PReLU slope. The loss is augmented with
``omega * sum |1 - slope|**0.5`` over the still-active channels. Channels
whose slope reaches the freeze threshold are snapped to slope 1 and frozen
for good. An optional controller steers the run towards a target fraction
of inactive channels.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .metrics import structure_metrics
from .records import ExperimentRecord
from .tensornet.layers import ChannelPReLU, ReLU
from .tensornet.optim import SGD, multistep_lr, scaled_milestones

REGULARIZING = "regularizing"
STOPPED = "stopped"


@dataclass
class RegularizerConfig:
    omega: float = 0.003
    exponent: float = 0.5
    freeze_threshold: float = 0.99
    freeze_margin: float = 0.01
    delta: float = 1e-4
    target: float | None = None
    band: float = 0.01
    slowdown_band: float = 0.05
    decay: float = 0.5
    regress_to_relu: bool = False

    def __post_init__(self):
        if self.omega < 0:
            raise InvalidSpec("omega must be non-negative")
        if not 0 < self.freeze_threshold < 1:
            raise InvalidSpec("freeze threshold must lie in (0, 1)")
        if self.target is not None and not 0 <= self.target <= 1:
            raise InvalidSpec("target inactive fraction must lie in [0, 1]")


@dataclass
class LinearizeConfig:
    """Hyperparameters of one linearization phase (post-training defaults)."""

    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    epochs: int = 60
    lr: float = 0.1
    milestones: tuple | None = None  # None: 1/3 and 2/3 of the phase
    gamma: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 256

    def schedule(self):
        ms = scaled_milestones(self.epochs) if self.milestones is None else tuple(self.milestones)
        return ms


class LinearizationState:
    """Per-unit status over all PReLU layers, concatenated in network order."""

    def __init__(self, layer_sizes, omega, frozen=None):
        self.layer_sizes = list(layer_sizes)
        n = sum(self.layer_sizes)
        self.frozen = np.zeros(n, dtype=bool) if frozen is None else np.asarray(frozen, bool).copy()
        self.freeze_epoch = np.full(n, -1, dtype=np.int64)
        self.omega = float(omega)
        self.initial_omega = float(omega)
        self.phase = REGULARIZING
        self.last_decay_epoch = None

    @classmethod
    def for_network(cls, net, omega):
        layers = net.prelu_layers()
        frozen = np.concatenate([~l.active for l in layers]) if layers else None
        return cls([l.channels for l in layers], omega, frozen)

    @property
    def inactive_fraction(self):
        return float(self.frozen.mean()) if self.frozen.size else 0.0

    def layer_slices(self):
        out, start = [], 0
        for n in self.layer_sizes:
            out.append(slice(start, start + n))
            start += n
        return out

    def snapshot(self):
        return copy.deepcopy(self)

    def to_dict(self):
        return {"layer_sizes": self.layer_sizes, "frozen": self.frozen.astype(int).tolist(),
                "freeze_epoch": self.freeze_epoch.tolist(), "omega": self.omega,
                "initial_omega": self.initial_omega, "phase": self.phase}

    @classmethod
    def from_dict(cls, d):
        s = cls(d["layer_sizes"], d["omega"], d["frozen"])
        s.freeze_epoch = np.asarray(d["freeze_epoch"], dtype=np.int64)
        s.initial_omega = d.get("initial_omega", d["omega"])
        s.phase = d["phase"]
        return s


def attach_prelus(net, initial_slope=0.0, only=None):
    """Swap ReLU sites for channel PReLUs with the given initial slope.

    Slope 0 leaves the network function unchanged. ``only`` optionally lists,
    per activation site, whether that site should be converted.
    """
    sites = net.activation_layers()
    if only is None:
        only = [True] * len(sites)
    for keep, site in zip(only, sites):
        if keep and isinstance(site, ReLU):
            idx = next(i for i, l in enumerate(net.layers) if l is site)
            net.layers[idx] = ChannelPReLU(site.channels, initial_slope)
    if net.config is not None:
        net.config = copy.deepcopy(net.config)
    return net


def reg_penalty(slopes, frozen, omega, exponent=0.5):
    """omega * sum over active units of |1 - slope|**exponent."""
    slopes = np.asarray(slopes, dtype=np.float64)
    live = ~np.asarray(frozen, dtype=bool)
    return float(omega * (np.abs(1.0 - slopes[live]) ** exponent).sum())


def reg_gradient(alpha, omega, delta=1e-4):
    """Derivative of omega * |1 - alpha|**0.5, with |1 - alpha| clamped below by delta."""
    alpha = np.asarray(alpha, dtype=np.float64)
    dist = np.maximum(np.abs(1.0 - alpha), delta)
    return -omega * 0.5 * dist ** -0.5 * np.sign(1.0 - alpha)


def _relu_pull_gradient(alpha, omega, delta=1e-4):
    # derivative of omega * |alpha|**0.5: pulls the remaining slopes to 0
    alpha = np.asarray(alpha, dtype=np.float64)
    dist = np.maximum(np.abs(alpha), delta)
    return omega * 0.5 * dist ** -0.5 * np.sign(alpha)


def freeze_sweep(state, net, epoch, config=None):
    """Freeze every active unit whose slope reached the threshold.

    Frozen slopes are set to exactly 1. Returns the number of newly frozen units.
    """
    threshold = 0.99 if config is None else config.freeze_threshold
    newly = 0
    for layer, sl in zip(net.prelu_layers(), state.layer_slices()):
        hit = layer.active & (layer.slopes.value >= threshold)
        if hit.any():
            layer.deactivate(hit)
            idx = np.flatnonzero(hit) + sl.start
            state.frozen[idx] = True
            state.freeze_epoch[idx] = epoch
            newly += int(hit.sum())
    return newly


def controller_step(state, config, epoch=None):
    """Target-fraction control: stop at the band, slow down close to it."""
    if config.target is None or state.phase == STOPPED:
        return state
    f = state.inactive_fraction
    if f >= config.target - config.band:
        state.omega = 0.0
        state.phase = STOPPED
    elif f >= config.target - config.slowdown_band and state.last_decay_epoch != epoch:
        state.omega *= config.decay
        state.last_decay_epoch = epoch
    return state


class Regularizer:
    """Hooks the penalty, freeze rule and controller into a training loop."""

    def __init__(self, net, config: RegularizerConfig, state: LinearizationState | None = None):
        self.net = net
        self.config = config
        self.state = LinearizationState.for_network(net, config.omega) if state is None else state

    @property
    def enabled(self):
        return self.state.phase == REGULARIZING and self.state.omega > 0

    def penalty(self):
        if not self.enabled:
            return 0.0
        return sum(
            reg_penalty(l.slopes.value, l.slopes.frozen, self.state.omega, self.config.exponent)
            for l in self.net.prelu_layers()
        )

    def add_gradients(self):
        layers = self.net.prelu_layers()
        if self.enabled:
            for l in layers:
                live = l.active
                l.slopes.grad[live] += reg_gradient(l.slopes.value[live], self.state.omega, self.config.delta)
        elif self.state.phase == STOPPED and self.config.regress_to_relu:
            for l in layers:
                live = l.active
                l.slopes.grad[live] += _relu_pull_gradient(
                    l.slopes.value[live], self.state.initial_omega, self.config.delta)

    def after_step(self, epoch):
        # freezing only happens while the penalty is switched on
        if self.enabled:
            freeze_sweep(self.state, self.net, epoch, self.config)
            controller_step(self.state, self.config, epoch)


def train_epoch(net, opt, x, y, lr, batch_size, rng, regularizer=None, epoch=0):
    """One shuffled pass over (x, y); returns mean (loss + penalty) and accuracy."""
    order = rng.permutation(len(x))
    total_loss, correct = 0.0, 0
    for start in range(0, len(x), batch_size):
        idx = order[start:start + batch_size]
        opt.zero_grad()
        loss, logits = net.forward_loss(x[idx], y[idx], train=True)
        net.backward()
        if regularizer is not None:
            loss += regularizer.penalty()
            regularizer.add_gradients()
        opt.step(lr)
        if regularizer is not None:
            regularizer.after_step(epoch)
        total_loss += loss * len(idx)
        correct += int((logits.argmax(axis=1) == y[idx]).sum())
    return total_loss / len(x), correct / len(x)


def metrics_row(net, data, epoch, phase, lr, loss, train_acc, omega):
    m = structure_metrics(net)
    return dict(epoch=epoch, phase=phase, lr=lr, train_loss=loss, train_acc=train_acc,
                test_acc=net.accuracy(data.x_test, data.y_test), omega=omega, **m)


def linearization_run(net, config: LinearizeConfig, data, rng, state=None, record=None,
                      epoch_offset=0, on_epoch=None):
    """Post-training linearization phase.

    Swaps ReLUs for zero-slope PReLUs if needed, restarts the learning rate at
    ``config.lr`` with a fresh multistep schedule, and trains with the
    regularizer for ``config.epochs`` epochs, logging one row per epoch.
    """
    attach_prelus(net, 0.0)
    reg = Regularizer(net, config.regularizer, state)
    opt = SGD(net.params(), config.lr, config.momentum, config.weight_decay)
    record = ExperimentRecord() if record is None else record
    milestones = config.schedule()
    for e in range(config.epochs):
        lr = multistep_lr(e, config.lr, milestones, config.gamma)
        epoch = epoch_offset + e + 1
        loss, acc = train_epoch(net, opt, data.x_train, data.y_train, lr, config.batch_size,
                                rng, reg, epoch)
        record.add(**metrics_row(net, data, epoch, "linearize", lr, loss, acc, reg.state.omega))
        if on_epoch is not None:
            on_epoch(record)
    return net, reg.state, record
