"""First-order optimisers operating in place on a network's parameters."""

import numpy as np

from ..exceptions import ValidationError


class SGD:
    def __init__(self, lr=1e-2, momentum=0.0):
        self.lr = float(lr)
        self.momentum = float(momentum)
        self._vel = {}

    def step(self, network, grads):
        for k, (layer, g) in enumerate(zip(network.layers, grads)):
            for name, gp in g.items():
                if self.momentum:
                    v = self._vel.get((k, name), 0.0)
                    v = self.momentum * v + gp
                    self._vel[(k, name)] = v
                    gp = v
                layer.params[name] -= self.lr * gp


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValidationError("Adam betas must lie in [0, 1)")
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = float(beta1), float(beta2), float(eps)
        self.t = 0
        self._m = {}
        self._v = {}

    def step(self, network, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, (layer, g) in enumerate(zip(network.layers, grads)):
            for name, gp in g.items():
                m = self._m.get((k, name), np.zeros_like(gp))
                v = self._v.get((k, name), np.zeros_like(gp))
                m = self.beta1 * m + (1 - self.beta1) * gp
                v = self.beta2 * v + (1 - self.beta2) * gp * gp
                self._m[(k, name)], self._v[(k, name)] = m, v
                layer.params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name, lr, **kwargs):
    if name == "adam":
        return Adam(lr, **{k: kwargs[k] for k in ("beta1", "beta2", "eps") if k in kwargs})
    if name == "sgd":
        return SGD(lr, kwargs.get("momentum", 0.0))
    raise ValidationError(f"optimizer must be 'adam' or 'sgd', got {name!r}")
