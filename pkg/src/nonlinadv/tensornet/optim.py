import numpy as np


class SGD:
    """SGD with heavy-ball momentum; weight decay is added to the gradient
    before the momentum update. Frozen entries are never touched."""

    def __init__(self, params, lr=0.1, momentum=0.9, weight_decay=1e-4):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.value) for p in self.params]

    def add_params(self, params):
        """Start optimizing additional parameters with zero momentum."""
        for p in params:
            if not any(p is q for q in self.params):
                self.params.append(p)
                self.velocity.append(np.zeros_like(p.value))

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        for p, v in zip(self.params, self.velocity):
            live = ~p.frozen
            g = p.grad + self.weight_decay * p.value
            v_new = self.momentum * v + g
            v[live] = v_new[live]
            p.value[live] -= lr * v[live]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def state_dict(self):
        return {"lr": self.lr, "momentum": self.momentum, "weight_decay": self.weight_decay,
                "velocity": [v.copy() for v in self.velocity]}


def multistep_lr(epoch, base_lr, milestones=(), gamma=0.1):
    """Learning rate after decaying by ``gamma`` at each milestone <= epoch."""
    ms = list(milestones)
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValueError("milestones must be strictly increasing")
    return base_lr * gamma ** sum(1 for m in ms if m <= epoch)


def scaled_milestones(epochs, fractions=(1 / 3, 2 / 3)):
    """Milestones at fixed fractions of a phase, e.g. 20/40 for 60 epochs."""
    out = []
    for f in fractions:
        m = int(round(epochs * f))
        if 0 < m < epochs and (not out or m > out[-1]):
            out.append(m)
    return tuple(out)
