"""Target adapters.

Every kernel runs in *reference* coordinates where the prior is N(0, I):

* ``exact``     - whitened parameters, exact forward model (gradient C^{1/2} DPhi);
* ``emulative`` - whitened parameters, emulated potential;
* ``dream``     - autoencoder latent coordinates, emulated potential composed
                  with the decoder, plus the Jacobian volume correction.

``to_original`` maps reference states back to the parameter space in which
samples are stored.
"""

import numpy as np

from ..autoencoder import log_gram_det
from ..exceptions import ConfigError, UnsupportedGradient

VOLUME_MODES = ("accept", "reweight", "none")


class Target:
    space = "generic"
    has_gradient = True
    volume_mode = "none"

    def __init__(self, dim):
        self.dim = int(dim)

    def potential(self, x):
        raise NotImplementedError

    def potential_and_grad(self, x):
        raise NotImplementedError

    def to_original(self, X):
        return np.asarray(X, dtype=np.float64)

    def from_original(self, U):
        return np.asarray(U, dtype=np.float64)

    @property
    def original_dim(self):
        return self.dim

    def log_volume(self, x, x_new):
        """Log volume ratio entering the acceptance probability (zero outside latent space)."""
        return 0.0

    def log_weight(self, x):
        """Per-sample log importance weight (``reweight`` mode only)."""
        return 0.0

    @property
    def n_solves(self):
        return 0


class CallableTarget(Target):
    """Potential given directly in reference coordinates, e.g. Phi = 0 for prior checks."""

    space = "callable"

    def __init__(self, dim, potential, grad=None):
        super().__init__(dim)
        self._potential = potential
        self._grad = grad
        self.has_gradient = grad is not None

    def potential(self, x):
        return float(self._potential(x))

    def potential_and_grad(self, x):
        if self._grad is None:
            raise UnsupportedGradient("target has no gradient")
        return float(self._potential(x)), np.asarray(self._grad(x), dtype=np.float64)


def zero_target(dim):
    return CallableTarget(dim, lambda x: 0.0, lambda x: np.zeros(dim))


class ExactTarget(Target):
    """Whitened coordinates with the exact forward model."""

    space = "exact"

    def __init__(self, model, obs, prior):
        super().__init__(prior.dim)
        self.model = model
        self.obs = obs
        self.prior = prior
        self.has_gradient = bool(model.has_exact_gradient)

    def potential(self, x):
        return float(self.obs.misfit(self.model.evaluate(self.prior.sqrt_apply(x))))

    def potential_and_grad(self, x):
        if not self.has_gradient:
            raise UnsupportedGradient(f"{self.model.name} model has no exact gradient")
        phi, g = self.model.potential_and_grad(self.prior.sqrt_apply(x), self.obs)
        return phi, self.prior.sqrt_apply(g)

    def to_original(self, X):
        return self.prior.sqrt_apply(X)

    def from_original(self, U):
        return self.prior.invsqrt_apply(U)

    @property
    def n_solves(self):
        return self.model.n_solves


class EmulativeTarget(Target):
    """Whitened coordinates with an emulated potential; no exact solves."""

    space = "emulative"

    def __init__(self, emulator, prior):
        super().__init__(prior.dim)
        self.emulator = emulator
        self.prior = prior

    def potential(self, x):
        return self.emulator.potential(x)

    def potential_and_grad(self, x):
        return self.emulator.potential_and_grad(x)

    def to_original(self, X):
        return self.prior.sqrt_apply(X)

    def from_original(self, U):
        return self.prior.invsqrt_apply(U)


class LatentTarget(Target):
    """Latent coordinates of an autoencoder with the emulated potential (DREAM)."""

    space = "dream"

    def __init__(self, emulator, autoencoder, prior, volume_mode="accept"):
        if volume_mode not in VOLUME_MODES:
            raise ConfigError(f"volume_mode must be one of {VOLUME_MODES}, got {volume_mode!r}")
        super().__init__(autoencoder.d_latent)
        self.emulator = emulator
        self.ae = autoencoder
        self.prior = prior
        self.volume_mode = volume_mode

    def potential(self, z):
        return self.ae.reduced_potential(self.emulator.potential, z)

    def potential_and_grad(self, z):
        return self.ae.reduced_potential_and_grad(self.emulator.potential_and_grad, z)

    @property
    def original_dim(self):
        return self.prior.dim

    def to_original(self, Z):
        return self.prior.sqrt_apply(self.ae.decode(Z))

    def from_original(self, U):
        return self.ae.encode(self.prior.invsqrt_apply(U))

    def log_volume(self, z, z_new):
        if self.volume_mode != "accept":
            return 0.0
        return self.ae.log_volume_correction(self.ae.decode(z), z_new)

    def log_weight(self, z):
        return log_gram_det(self.ae.decoder_jacobian(z), "decoder")


def make_target(space, prior, model=None, obs=None, emulator=None, autoencoder=None, volume_mode="accept"):
    if space == "exact":
        if model is None or obs is None:
            raise ConfigError("exact space needs the forward model and observations")
        return ExactTarget(model, obs, prior)
    if space == "emulative":
        if emulator is None:
            raise ConfigError("emulative space needs a trained emulator")
        return EmulativeTarget(emulator, prior)
    if space == "dream":
        if emulator is None or autoencoder is None:
            raise ConfigError("dream space needs a trained emulator and autoencoder")
        return LatentTarget(emulator, autoencoder, prior, volume_mode)
    raise ConfigError(f"space must be 'exact', 'emulative' or 'dream', got {space!r}")
