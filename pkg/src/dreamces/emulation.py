"""Neural-network emulation of the forward map.

:class:`NetworkRegressor` is a scikit-learn regressor wrapping a dense or
convolutional :class:`~dreamces.nn.Network`.  :class:`Emulator` pairs a fitted
regressor with the observations so that the emulated potential and its exact
reverse-mode gradient are available to the samplers.  Emulators work on
whitened inputs.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import as_vector, make_rng
from .exceptions import ValidationError
from .nn import TrainConfig, conv_network, dense_network, train_network
from .nn.training import split_indices


class NetworkRegressor(RegressorMixin, BaseEstimator):
    """Multi-output network regression trained by mini-batch MSE minimisation.

    Targets are standardised per output before training; predictions and
    derivatives are reported on the original target scale.
    """

    def __init__(self, architecture="dense", n_layers=3, activation="softplus", alpha=None,
                 output_activation="linear", dropout=0.0, grid=None, filters=(8, 16), kernel_size=3,
                 pool=2, latent=256, latent_activation="softmax", standardize=True, optimizer="adam",
                 learning_rate=1e-3, lr_decay=1.0, batch_size=32, epochs=200, split=0.75, seed=0):
        self.architecture = architecture
        self.n_layers = n_layers
        self.activation = activation
        self.alpha = alpha
        self.output_activation = output_activation
        self.dropout = dropout
        self.grid = grid
        self.filters = filters
        self.kernel_size = kernel_size
        self.pool = pool
        self.latent = latent
        self.latent_activation = latent_activation
        self.standardize = standardize
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.split = split
        self.seed = seed

    def _build(self, d, m):
        if self.architecture == "dense":
            return dense_network(d, m, self.n_layers, self.activation, self.output_activation,
                                 self.alpha, self.dropout, seed=make_rng(self.seed, 3))
        if self.architecture == "conv":
            grid = tuple(self.grid) if self.grid is not None else None
            if grid is None or grid[0] * grid[1] != d:
                raise ValidationError(f"conv architecture needs a grid with h*w = {d}, got {self.grid}")
            return conv_network(grid, m, tuple(self.filters), self.kernel_size, self.pool, self.latent,
                                self.activation, self.latent_activation, self.dropout,
                                seed=make_rng(self.seed, 3))
        raise ValidationError(f"architecture must be 'dense' or 'conv', got {self.architecture!r}")

    def train_config(self):
        return TrainConfig(self.optimizer, self.learning_rate, self.batch_size, self.epochs,
                           self.split, lr_decay=self.lr_decay, seed=self.seed)

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        Y = y.reshape(len(y), -1)
        if len(X) < 2:
            raise ValidationError("emulator training needs at least two pairs")
        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = Y.shape[1]
        if self.standardize:
            self.y_mean_ = Y.mean(axis=0)
            scale = Y.std(axis=0)
            self.y_scale_ = np.where(scale > 0, scale, 1.0)
        else:
            self.y_mean_ = np.zeros(self.n_outputs_)
            self.y_scale_ = np.ones(self.n_outputs_)
        self.network_ = self._build(self.n_features_in_, self.n_outputs_)
        self.train_result_ = train_network(self.network_, X, (Y - self.y_mean_) / self.y_scale_,
                                           self.train_config())
        return self

    def _input(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = check_array(X[None] if single else X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X, single

    def predict(self, X):
        check_is_fitted(self, "network_")
        X, single = self._input(X)
        Y = self.network_.predict(X) * self.y_scale_ + self.y_mean_
        return Y[0] if single else Y

    def vjp(self, x, w):
        """(dG^e/dx)^T w at a single input."""
        check_is_fitted(self, "network_")
        return self.network_.vjp(as_vector(x, "x", self.n_features_in_), np.asarray(w) * self.y_scale_)

    def linearize(self, x):
        """Prediction at a single input and a pullback ``w -> (dG^e/dx)^T w``."""
        check_is_fitted(self, "network_")
        y, pullback = self.network_.linearize(as_vector(x, "x", self.n_features_in_))
        return y * self.y_scale_ + self.y_mean_, lambda w: pullback(np.asarray(w) * self.y_scale_)

    def jacobian(self, x):
        check_is_fitted(self, "network_")
        return self.network_.jacobian(as_vector(x, "x", self.n_features_in_)) * self.y_scale_[:, None]

    def _more_tags(self):
        return {"multioutput": True}


class Emulator:
    """Emulated forward map on whitened inputs together with the data it is compared to."""

    def __init__(self, regressor, obs, grid=None):
        check_is_fitted(regressor, "network_")
        self.regressor = regressor
        self.obs = obs
        self.grid = grid
        if regressor.n_outputs_ != obs.m:
            raise ValidationError("emulator output size does not match the observations")

    @property
    def d(self):
        return self.regressor.n_features_in_

    @property
    def m(self):
        return self.regressor.n_outputs_

    def predict(self, u):
        return self.regressor.predict(u)

    def potential(self, u):
        return float(self.obs.misfit(self.predict(u)))

    def grad(self, u):
        return self.potential_and_grad(u)[1]

    def potential_and_grad(self, u):
        g, pullback = self.regressor.linearize(u)
        r = self.obs.y - g
        pr = self.obs.precision_apply(r)
        return 0.5 * float(r @ pr), pullback(-pr)


def emulated_potential(em, u):
    """0.5 * ||y - G^e(u)||^2_Gamma"""
    return em.potential(u)


def emulated_grad(em, u):
    """Reverse-mode gradient of :func:`emulated_potential`."""
    return em.grad(u)


def grid_reshape(u, geometry):
    """Row-major flat vector -> ``(1, h, w)`` image."""
    u = np.asarray(u, dtype=np.float64)
    h, w = geometry
    if u.shape[-1] != h * w:
        raise ValidationError(f"vector of length {u.shape[-1]} does not fill a {h}x{w} grid")
    return u.reshape(u.shape[:-1] + (1, h, w))


def grid_unreshape(img):
    img = np.asarray(img, dtype=np.float64)
    return img.reshape(img.shape[:-3] + (-1,))


def fit_emulator(history, prior, obs, regressor=None):
    """Train an emulator on the calibration pairs in whitened coordinates."""
    X, Y = history.pairs()
    reg = NetworkRegressor() if regressor is None else regressor
    reg.fit(prior.invsqrt_apply(X), Y)
    grid = tuple(reg.grid) if reg.grid is not None else None
    return Emulator(reg, obs, grid)


def relative_potential_error(em, model, U, whitened_inputs):
    """|Phi - Phi^e| / |Phi| per row of ``U`` (original coordinates)."""
    out = []
    for u, ut in zip(U, whitened_inputs):
        exact = em.obs.misfit(model.evaluate(u))
        out.append(abs(exact - em.potential(ut)) / abs(exact))
    return np.array(out)


def error_decay_probe(X, Y, capacities, model=None, prior=None, base=None, n_probe=20, fd_step=1e-6, seed=0):
    """Held-out error of emulators of increasing capacity trained on one fixed set.

    ``capacities`` is a list of dicts of :class:`NetworkRegressor` parameters
    overriding ``base``.  Each row reports the relative test error of the
    predicted values and, when ``model`` is given, the relative error of
    directional derivatives against central differences of the exact map
    (a discrete H^1-type error).  ``X`` are whitened inputs; ``prior`` maps
    them back for the exact model.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    base = {} if base is None else dict(base)
    rows = []
    for cap in capacities:
        params = {**base, **cap}
        reg = NetworkRegressor(**params).fit(X, Y)
        rng = make_rng(seed, 5)
        _, test = _test_split(len(X), reg.split, reg.seed)
        test = test[:n_probe] if len(test) else np.arange(min(n_probe, len(X)))
        pred = reg.predict(X[test])
        value_err = float(np.linalg.norm(pred - Y[test]) / np.linalg.norm(Y[test]))
        grad_err = float("nan")
        if model is not None:
            num, den = 0.0, 0.0
            for i in test:
                v = rng.standard_normal(X.shape[1])
                jv = reg.jacobian(X[i]) @ v
                to_u = (lambda z: prior.sqrt_apply(z)) if prior is not None else (lambda z: z)
                fd = (model.evaluate(to_u(X[i] + fd_step * v)) - model.evaluate(to_u(X[i] - fd_step * v))) / (2 * fd_step)
                num += np.sum((jv - fd) ** 2)
                den += np.sum(fd**2)
            grad_err = float(np.sqrt(num / den))
        rows.append({**cap, "n_params": reg.network_.n_params, "value_error": value_err,
                     "grad_error": grad_err, "h1_error": value_err + (0.0 if np.isnan(grad_err) else grad_err)})
    return rows


def _test_split(n, split, seed):
    # same permutation as the split drawn inside train_network
    return split_indices(n, split, make_rng(seed, 11))
