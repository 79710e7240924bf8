"""Sequential network with reverse-mode differentiation."""

import numpy as np

from .._validation import make_rng
from ..exceptions import ValidationError
from .layers import Conv2D, Dense, Dropout, Flatten, Pool2D, Reshape, layer_from_config


class Network:
    """Feed-forward composition of layers.

    Shapes are checked once, at construction.  ``input_shape`` excludes the
    batch axis; a flat vector input is ``(d,)``.
    """

    def __init__(self, layers, input_shape, seed=0):
        if not layers:
            raise ValidationError("a network needs at least one layer")
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in np.atleast_1d(input_shape))
        rng = make_rng(seed)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.build(shape, rng)
        self.output_shape = shape

    @property
    def n_params(self):
        return sum(layer.n_params for layer in self.layers)

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.shape == self.input_shape
        if single:
            x = x[None]
        if x.shape[1:] != self.input_shape:
            raise ValidationError(f"network expects input shape {self.input_shape}, got {x.shape}")
        return x, single

    def forward(self, x, training=False, rng=None):
        """Batched forward pass; returns the output and the per-layer caches."""
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, training, rng)
            caches.append(cache)
        return x, caches

    def backward(self, caches, gy, params=True):
        """Reverse sweep; returns the input cotangent and per-layer parameter gradients.

        With ``params=False`` only the input cotangent is computed (weight
        gradients are left out of the returned dicts).
        """
        grads = [None] * len(self.layers)
        for k in range(len(self.layers) - 1, -1, -1):
            gy, grads[k] = self.layers[k].backward(caches[k], gy, params)
        return gy, grads

    def predict(self, x):
        """Inference-mode output; accepts one sample or a batch."""
        x, single = self._as_batch(x)
        y, _ = self.forward(x)
        return y[0] if single else y

    __call__ = predict

    def vjp(self, x, cotangent):
        """(dN/dx)^T cotangent in inference mode; batched like ``predict``."""
        x, single = self._as_batch(x)
        cot = np.asarray(cotangent, dtype=np.float64)
        if single:
            cot = cot[None]
        _, caches = self.forward(x)
        gx, _ = self.backward(caches, cot.reshape((x.shape[0],) + self.output_shape), params=False)
        return gx[0] if single else gx

    def linearize(self, x):
        """Output at a single input and a pullback ``cotangent -> input cotangent``."""
        x = np.asarray(x, dtype=np.float64).reshape(self.input_shape)
        y, caches = self.forward(x[None])

        def pullback(cotangent):
            cot = np.asarray(cotangent, dtype=np.float64).reshape((1,) + self.output_shape)
            return self.backward(caches, cot, params=False)[0][0]

        return y[0], pullback

    def jacobian(self, x):
        """Full Jacobian at a single input, shape ``(out_size, in_size)``.

        Built from one batched reverse sweep with identity cotangents, or by
        forward-mode tangent propagation when the network is a chain of
        pointwise dense layers with fewer inputs than outputs.
        """
        x = np.asarray(x, dtype=np.float64).reshape(self.input_shape)
        n_out = int(np.prod(self.output_shape))
        n_in = int(np.prod(self.input_shape))
        if n_in < n_out and all(isinstance(l, Dense) and l.pointwise for l in self.layers):
            _, caches = self.forward(x[None])
            t = np.eye(n_in)
            for layer, cache in zip(self.layers, caches):
                t = layer.tangent(cache, t)
            return t
        batch = np.broadcast_to(x, (n_out,) + self.input_shape)
        _, caches = self.forward(np.ascontiguousarray(batch))
        eye = np.eye(n_out).reshape((n_out,) + self.output_shape)
        gx, _ = self.backward(caches, eye, params=False)
        return gx.reshape(n_out, -1)

    def get_weights(self):
        return [{k: v.copy() for k, v in layer.params.items()} for layer in self.layers]

    def set_weights(self, weights):
        if len(weights) != len(self.layers):
            raise ValidationError("weight list does not match number of layers")
        for layer, w in zip(self.layers, weights):
            for k, v in w.items():
                if k not in layer.params or layer.params[k].shape != np.shape(v):
                    raise ValidationError(f"weight {k!r} does not fit layer {layer.kind}")
                layer.params[k] = np.array(v, dtype=np.float64)

    def manifest(self):
        """Topology description: JSON-compatible, parameters excluded."""
        return {"input_shape": list(self.input_shape), "layers": [layer.config() for layer in self.layers]}

    @classmethod
    def from_manifest(cls, manifest, weights=None):
        layers = [layer_from_config(cfg) for cfg in manifest["layers"]]
        net = cls(layers, manifest["input_shape"])
        if weights is not None:
            net.set_weights(weights)
        return net


def interpolate_widths(n_in, n_out, n_layers):
    """Hidden widths spaced linearly between ``n_in`` and ``n_out``."""
    if n_layers < 1:
        raise ValidationError("need at least one layer")
    widths = np.linspace(n_in, n_out, n_layers + 1)[1:]
    return [max(1, int(round(w))) for w in widths]


def dense_network(n_in, n_out, n_layers=3, activation="softplus", output_activation="linear",
                  alpha=None, dropout=0.0, widths=None, seed=0):
    """Fully connected net; hidden widths interpolate from ``n_in`` to ``n_out`` by default."""
    widths = interpolate_widths(n_in, n_out, n_layers) if widths is None else list(widths) + [n_out]
    layers = []
    for k, w in enumerate(widths):
        last = k == len(widths) - 1
        layers.append(Dense(w, output_activation if last else activation, None if last else alpha))
        if dropout and not last:
            layers.append(Dropout(dropout))
    return Network(layers, (n_in,), seed)


def conv_network(grid, n_out, filters=(8, 16), kernel_size=3, pool=2, latent=256,
                 activation="relu", latent_activation="softmax", dropout=0.0, seed=0):
    """Conv(+pool) blocks on a one-channel ``grid`` image, then a dense latent layer and a linear output."""
    h, w = grid
    layers = [Reshape((1, h, w))]
    for f in filters:
        layers.append(Conv2D(f, kernel_size, 1, 0, activation))
        if pool:
            layers.append(Pool2D(pool, "max"))
    layers.append(Flatten())
    if dropout:
        layers.append(Dropout(dropout))
    layers.append(Dense(latent, latent_activation))
    layers.append(Dense(n_out, "linear"))
    return Network(layers, (h * w,), seed)


__all__ = ["Network", "Dense", "Conv2D", "Pool2D", "Flatten", "Reshape", "Dropout",
           "dense_network", "conv_network", "interpolate_widths"]
