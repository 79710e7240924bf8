"""Pointwise activations with explicit derivatives.

Each activation is a pair ``forward(x, alpha) -> y`` and
``backward(x, y, gy, alpha) -> (gx, galpha)``; ``galpha`` is only non-None
for ``prelu``, whose slope is a learned parameter.
"""

import numpy as np

from ..exceptions import ValidationError


def _relu(x, a):
    return np.maximum(x, 0.0)


def _relu_b(x, y, gy, a):
    return gy * (x > 0), None


def _leaky(x, a):
    return np.where(x > 0, x, a * x)


def _leaky_b(x, y, gy, a):
    return gy * np.where(x > 0, 1.0, a), None


def _tanh(x, a):
    return np.tanh(x)


def _tanh_b(x, y, gy, a):
    return gy * (1.0 - y * y), None


def _softplus(x, a):
    return np.logaddexp(0.0, x)


def _softplus_b(x, y, gy, a):
    return gy * 0.5 * (1.0 + np.tanh(0.5 * x)), None


def _softmax(x, a):
    if x.ndim != 2:
        raise ValidationError("softmax activation expects (batch, features) input")
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _softmax_b(x, y, gy, a):
    return y * (gy - np.sum(gy * y, axis=-1, keepdims=True)), None


def _prelu_b(x, y, gy, a):
    neg = x <= 0
    return gy * np.where(neg, a, 1.0), float(np.sum(gy * x * neg))


def _elu(x, a):
    return np.where(x > 0, x, a * np.expm1(np.minimum(x, 0.0)))


def _elu_b(x, y, gy, a):
    return gy * np.where(x > 0, 1.0, y + a), None


def _linear(x, a):
    return x


def _linear_b(x, y, gy, a):
    return gy, None


ACTIVATIONS = {
    "relu": (_relu, _relu_b, 0.0),
    "leaky_relu": (_leaky, _leaky_b, 0.01),
    "tanh": (_tanh, _tanh_b, 0.0),
    "softplus": (_softplus, _softplus_b, 0.0),
    "softmax": (_softmax, _softmax_b, 0.0),
    "prelu": (_leaky, _prelu_b, 0.25),
    "elu": (_elu, _elu_b, 1.0),
    "linear": (_linear, _linear_b, 0.0),
}


def get_activation(name, alpha=None):
    """Return ``(forward, backward, alpha)`` for ``name``."""
    try:
        fwd, bwd, default = ACTIVATIONS[name]
    except KeyError:
        raise ValidationError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None
    return fwd, bwd, float(default if alpha is None else alpha)
