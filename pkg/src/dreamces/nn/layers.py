"""Network layers.

Layers are stateless during evaluation: ``forward`` returns the output and a
cache, ``backward`` consumes the cache.  Nothing is stored on the layer
between the two calls, so a trained network can be evaluated from several
threads at once.  Arrays are batch-first; images are ``(batch, channels, h, w)``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ValidationError
from .activations import get_activation


def glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.in_shape = None
        self.out_shape = None

    def build(self, in_shape, rng):
        """Validate ``in_shape`` (without batch axis), initialise parameters, return output shape."""
        self.in_shape = tuple(in_shape)
        self.out_shape = self._build(self.in_shape, rng)
        return self.out_shape

    def _build(self, in_shape, rng):
        return in_shape

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, cache, gy, params=True):
        raise NotImplementedError

    def config(self):
        return {"kind": self.kind}

    @property
    def n_params(self):
        return sum(p.size for p in self.params.values())


class _Activated(Layer):
    """Layer whose affine output passes through an activation tag."""

    def __init__(self, activation="linear", alpha=None):
        super().__init__()
        self.activation = activation
        self._act, self._act_b, self.alpha = get_activation(activation, alpha)
        if activation == "prelu":
            self.params["alpha"] = np.array([self.alpha])

    def _slope(self):
        return float(self.params["alpha"][0]) if self.activation == "prelu" else self.alpha

    def _activate(self, z):
        return self._act(z, self._slope())

    def _deactivate(self, z, y, gy, grads):
        gz, ga = self._act_b(z, y, gy, self._slope())
        if ga is not None:
            grads["alpha"] = np.array([ga])
        return gz

    def config(self):
        cfg = super().config()
        cfg["activation"] = self.activation
        if self.activation != "prelu":
            cfg["alpha"] = self.alpha
        return cfg


class Dense(_Activated):
    kind = "dense"

    def __init__(self, units, activation="linear", alpha=None):
        super().__init__(activation, alpha)
        self.units = int(units)
        if self.units < 1:
            raise ValidationError("dense layer needs at least one unit")

    def _build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise ValidationError(f"dense layer expects flat input, got shape {in_shape}")
        n_in = in_shape[0]
        if "W" not in self.params:
            self.params["W"] = glorot(rng, n_in, self.units, (self.units, n_in))
            self.params["b"] = np.zeros(self.units)
        elif self.params["W"].shape != (self.units, n_in):
            raise ValidationError("stored dense weights do not match input shape")
        return (self.units,)

    def forward(self, x, training=False, rng=None):
        z = x @ self.params["W"].T + self.params["b"]
        y = self._activate(z)
        return y, (x, z, y)

    def backward(self, cache, gy, params=True):
        x, z, y = cache
        grads = {}
        gz = self._deactivate(z, y, gy, grads)
        if params:
            grads["W"] = gz.T @ x
            grads["b"] = gz.sum(axis=0)
        return gz @ self.params["W"], grads

    @property
    def pointwise(self):
        return self.activation != "softmax"

    def tangent(self, cache, t):
        """Forward-mode push of tangent columns ``t`` (in, k) at a single cached input."""
        _, z, y = cache
        slope, _ = self._act_b(z[0], y[0], np.ones_like(z[0]), self._slope())
        return slope[:, None] * (self.params["W"] @ t)

    def config(self):
        return {**super().config(), "units": self.units}


class Conv2D(_Activated):
    """Cross-correlation with ``(out, in, kh, kw)`` kernels, zero padding and stride."""

    kind = "conv2d"

    def __init__(self, filters, kernel_size=3, stride=1, padding=0, activation="linear", alpha=None):
        super().__init__(activation, alpha)
        self.filters = int(filters)
        ks = (kernel_size, kernel_size) if np.isscalar(kernel_size) else tuple(kernel_size)
        self.kernel_size = tuple(int(k) for k in ks)
        self.stride = int(stride)
        self.padding = int(padding)
        if self.filters < 1 or self.stride < 1 or self.padding < 0 or min(self.kernel_size) < 1:
            raise ValidationError("invalid convolution hyperparameters")

    def _build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise ValidationError(f"conv2d expects (channels, h, w) input, got {in_shape}")
        c, h, w = in_shape
        kh, kw = self.kernel_size
        ho = (h + 2 * self.padding - kh) // self.stride + 1
        wo = (w + 2 * self.padding - kw) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ValidationError(f"kernel {self.kernel_size} larger than padded input {in_shape}")
        shape = (self.filters, c, kh, kw)
        if "K" not in self.params:
            self.params["K"] = glorot(rng, c * kh * kw, self.filters * kh * kw, shape)
            self.params["b"] = np.zeros(self.filters)
        elif self.params["K"].shape != shape:
            raise ValidationError("stored kernels do not match input channels")
        return (self.filters, ho, wo)

    def _windows(self, x):
        p, s = self.padding, self.stride
        if p:
            x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        win = sliding_window_view(x, self.kernel_size, axis=(2, 3))[:, :, ::s, ::s]
        _, ho, wo = self.out_shape
        return win[:, :, :ho, :wo]

    def forward(self, x, training=False, rng=None):
        win = self._windows(x)
        z = np.tensordot(win, self.params["K"], axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        z = z + self.params["b"][None, :, None, None]
        y = self._activate(z)
        return y, (x.shape, win, z, y)

    def backward(self, cache, gy, params=True):
        x_shape, win, z, y = cache
        grads = {}
        gz = self._deactivate(z, y, gy, grads)
        if params:
            grads["K"] = np.tensordot(gz, win, axes=([0, 2, 3], [0, 2, 3]))
            grads["b"] = gz.sum(axis=(0, 2, 3))
        # (n, ho, wo, c, kh, kw) -> (n, c, ho, wo, kh, kw)
        gwin = np.tensordot(gz, self.params["K"], axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
        p, s = self.padding, self.stride
        n, c, h, w = x_shape
        gx = np.zeros((n, c, h + 2 * p, w + 2 * p))
        _, ho, wo = self.out_shape
        kh, kw = self.kernel_size
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i:i + s * ho:s, j:j + s * wo:s] += gwin[..., i, j]
        if p:
            gx = gx[:, :, p:-p, p:-p]
        return gx, grads

    def config(self):
        return {**super().config(), "filters": self.filters, "kernel_size": list(self.kernel_size),
                "stride": self.stride, "padding": self.padding}


class Pool2D(Layer):
    """Non-overlapping ``max`` or ``avg`` pooling; trailing rows/columns that do not fill a window are dropped."""

    kind = "pool2d"

    def __init__(self, window=2, mode="max"):
        super().__init__()
        if mode not in ("max", "avg"):
            raise ValidationError(f"pool mode must be 'max' or 'avg', got {mode!r}")
        self.window = int(window)
        self.mode = mode

    def _build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise ValidationError(f"pool2d expects (channels, h, w) input, got {in_shape}")
        c, h, w = in_shape
        k = self.window
        if h < k or w < k:
            raise ValidationError(f"pool window {k} exceeds input {in_shape}")
        return (c, h // k, w // k)

    def _blocks(self, x):
        n = x.shape[0]
        c, ho, wo = self.out_shape
        k = self.window
        x = x[:, :, :ho * k, :wo * k].reshape(n, c, ho, k, wo, k)
        return x.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, k * k)

    def forward(self, x, training=False, rng=None):
        blocks = self._blocks(x)
        if self.mode == "max":
            idx = np.argmax(blocks, axis=-1)  # first maximum in row-major order
            y = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
            return y, (x.shape, idx)
        return blocks.mean(axis=-1), (x.shape, None)

    def backward(self, cache, gy, params=True):
        x_shape, idx = cache
        n = x_shape[0]
        c, ho, wo = self.out_shape
        k = self.window
        if self.mode == "max":
            gb = np.zeros((n, c, ho, wo, k * k))
            np.put_along_axis(gb, idx[..., None], gy[..., None], axis=-1)
        else:
            gb = np.repeat(gy[..., None] / (k * k), k * k, axis=-1)
        gb = gb.reshape(n, c, ho, wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * k, wo * k)
        gx = np.zeros(x_shape)
        gx[:, :, :ho * k, :wo * k] = gb
        return gx, {}

    def config(self):
        return {"kind": self.kind, "window": self.window, "mode": self.mode}


class Flatten(Layer):
    kind = "flatten"

    def _build(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, gy, params=True):
        return gy.reshape(cache), {}


class Reshape(Layer):
    """Reshape each sample, e.g. a flat grid vector into a one-channel image."""

    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def _build(self, in_shape, rng):
        if np.prod(in_shape) != np.prod(self.shape):
            raise ValidationError(f"cannot reshape {in_shape} into {self.shape}")
        return self.shape

    def forward(self, x, training=False, rng=None):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, cache, gy, params=True):
        return gy.reshape(cache), {}

    def config(self):
        return {"kind": self.kind, "shape": list(self.shape)}


class Dropout(Layer):
    """Inverted dropout; the identity outside training mode."""

    kind = "dropout"

    def __init__(self, rate=0.5):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValidationError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValidationError("dropout in training mode needs a random generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, cache, gy, params=True):
        return (gy if cache is None else gy * cache), {}

    def config(self):
        return {"kind": self.kind, "rate": self.rate}


LAYER_TYPES = {cls.kind: cls for cls in (Dense, Conv2D, Pool2D, Flatten, Reshape, Dropout)}


def layer_from_config(cfg):
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    try:
        cls = LAYER_TYPES[kind]
    except KeyError:
        raise ValidationError(f"unknown layer kind {kind!r}") from None
    if "kernel_size" in cfg:
        cfg["kernel_size"] = tuple(cfg["kernel_size"])
    return cls(**cfg)
