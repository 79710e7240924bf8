"""Dense autoencoder on whitened parameters and the latent-space quantities built on it.

The encoder phi maps R^d -> R^{d_L} and the decoder psi maps back.  Latent
potentials compose a whitened-space potential with psi; their gradients are a
single decoder reverse sweep.  The volume correction used by latent MCMC is
the sum of log singular values of the decoder and encoder Jacobians.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_vector, make_rng
from .exceptions import RankDeficiencyError, ValidationError
from .nn import Dense, Network, TrainConfig, interpolate_widths, train_network

SINGULAR_FLOOR = 1e-12
# squared-condition threshold below which the Gram route loses accuracy
GRAM_RCOND = 1e-8


class Autoencoder(TransformerMixin, BaseEstimator):
    """Encoder/decoder pair trained jointly on reconstruction MSE.

    Each half has ``n_layers`` dense layers with widths interpolated between
    ``d`` and ``latent_dim`` (or fixed at ``hidden`` when given); hidden layers
    use ``activation``, the latent and output layers are linear.
    """

    def __init__(self, latent_dim=2, n_layers=2, activation="leaky_relu", alpha=2.0, optimizer="adam",
                 learning_rate=1e-3, lr_decay=1.0, batch_size=32, epochs=200, split=0.75, seed=0, hidden=None):
        self.latent_dim = latent_dim
        self.n_layers = n_layers
        self.hidden = hidden
        self.activation = activation
        self.alpha = alpha
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.split = split
        self.seed = seed

    def _half(self, n_in, n_out):
        widths = interpolate_widths(n_in, n_out, self.n_layers)
        if self.hidden is not None:
            widths[:-1] = [int(self.hidden)] * (len(widths) - 1)
        return [Dense(w, "linear" if k == len(widths) - 1 else self.activation,
                      None if k == len(widths) - 1 else self.alpha)
                for k, w in enumerate(widths)]

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        d = X.shape[1]
        if not 1 <= self.latent_dim <= d:
            raise ValidationError(f"latent_dim must lie in [1, {d}], got {self.latent_dim}")
        if len(X) < 2:
            raise ValidationError("autoencoder training needs at least two samples")
        enc, dec = self._half(d, self.latent_dim), self._half(self.latent_dim, d)
        full = Network(enc + dec, (d,), make_rng(self.seed, 4))
        cfg = TrainConfig(self.optimizer, self.learning_rate, self.batch_size, self.epochs, self.split,
                          lr_decay=self.lr_decay, seed=self.seed)
        self.train_result_ = train_network(full, X, X, cfg)
        self._set_halves(Network(enc, (d,)), Network(dec, (self.latent_dim,)))
        return self

    def _set_halves(self, encoder, decoder):
        self.encoder_ = encoder
        self.decoder_ = decoder
        self.n_features_in_ = encoder.input_shape[0]

    @classmethod
    def from_networks(cls, encoder, decoder):
        """Wrap existing encoder/decoder networks (e.g. fixed linear maps)."""
        if encoder.output_shape != decoder.input_shape or decoder.output_shape != encoder.input_shape:
            raise ValidationError("encoder and decoder shapes are not compatible")
        ae = cls(latent_dim=decoder.input_shape[0])
        ae._set_halves(encoder, decoder)
        return ae

    @property
    def d(self):
        return self.n_features_in_

    @property
    def d_latent(self):
        return self.decoder_.input_shape[0]

    def encode(self, X):
        check_is_fitted(self, "encoder_")
        return self.encoder_.predict(X)

    def decode(self, Z):
        check_is_fitted(self, "decoder_")
        return self.decoder_.predict(Z)

    transform = encode
    inverse_transform = decode

    def reconstruction_error(self, X):
        """Relative reconstruction error ||psi(phi(x)) - x|| / ||x|| per row."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        R = self.decode(self.encode(X))
        return np.linalg.norm(R - X, axis=1) / np.linalg.norm(X, axis=1)

    def decoder_jacobian(self, z):
        """d x d_L"""
        check_is_fitted(self, "decoder_")
        return self.decoder_.jacobian(as_vector(z, "u_L", self.d_latent))

    def encoder_jacobian(self, u):
        """d_L x d"""
        check_is_fitted(self, "encoder_")
        return self.encoder_.jacobian(as_vector(u, "u", self.d))

    def decoder_vjp(self, z, v):
        return self.decoder_.vjp(as_vector(z, "u_L", self.d_latent), v)

    def reduced_potential(self, potential, z):
        return potential(self.decode(as_vector(z, "u_L", self.d_latent)))

    def reduced_grad(self, grad, z):
        z = as_vector(z, "u_L", self.d_latent)
        return self.decoder_vjp(z, grad(self.decode(z)))

    def reduced_potential_and_grad(self, potential_and_grad, z):
        """Phi_r(z) and its gradient from one decoder pass and one inner evaluation."""
        check_is_fitted(self, "decoder_")
        u, pullback = self.decoder_.linearize(as_vector(z, "u_L", self.d_latent))
        phi, g = potential_and_grad(u)
        return phi, pullback(g)

    def log_volume_correction(self, u, z_new):
        """log det d psi(z_new) + log det d phi(u), each a Gram-determinant square root."""
        return (log_gram_det(self.decoder_jacobian(z_new), "decoder")
                + log_gram_det(self.encoder_jacobian(u), "encoder"))


def log_gram_det(jac, which="map"):
    """Sum of log singular values of a rectangular Jacobian, i.e. 0.5 log det(J^T J).

    Uses the eigenvalues of the smaller Gram matrix and falls back to an SVD
    when the Gram matrix is too ill-conditioned for that to be accurate.
    """
    jac = np.asarray(jac, dtype=np.float64)
    gram = jac.T @ jac if jac.shape[0] >= jac.shape[1] else jac @ jac.T
    ev = np.linalg.eigvalsh(gram) if gram.size else np.empty(0)
    if ev.size and ev[0] > GRAM_RCOND * ev[-1]:
        return float(0.5 * np.sum(np.log(ev)))
    s = np.linalg.svd(jac, compute_uv=False)
    smallest = float(s.min()) if s.size else 0.0
    if smallest <= SINGULAR_FLOOR:
        raise RankDeficiencyError(which, smallest)
    return float(np.sum(np.log(s)))


def train_ae(samples, latent_dim, **params):
    return Autoencoder(latent_dim=latent_dim, **params).fit(samples)


def encode(ae, u):
    return ae.encode(u)


def decode(ae, z):
    return ae.decode(z)


def reduced_potential(ae, potential, z):
    return ae.reduced_potential(potential, z)


def reduced_grad(ae, grad, z):
    return ae.reduced_grad(grad, z)


def decoder_jacobian(ae, z):
    return ae.decoder_jacobian(z)


def encoder_jacobian(ae, u):
    return ae.encoder_jacobian(u)


def log_volume_correction(ae, u, z_new):
    return ae.log_volume_correction(u, z_new)
