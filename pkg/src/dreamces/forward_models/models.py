"""Forward-model interface, observation noise, and the analytic benchmarks."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .._validation import as_matrix, as_vector, check_spd, make_rng
from ..exceptions import UnsupportedGradient, ValidationError


@dataclass
class ObservationSet:
    """Data ``y`` with Gaussian noise covariance.

    ``noise_cov`` is either a positive scalar (variance, meaning
    ``sigma_eta**2 * I``) or a full SPD ``m x m`` matrix.
    """

    y: np.ndarray
    noise_cov: object = 1.0

    def __post_init__(self):
        self.y = as_vector(self.y, "y")
        if np.ndim(self.noise_cov) == 0:
            var = float(self.noise_cov)
            if not np.isfinite(var) or var <= 0:
                raise ValidationError(f"noise variance must be positive, got {var}")
            self.noise_cov = var
            self._chol = None
        else:
            cov = check_spd(self.noise_cov, "noise covariance")
            if cov.shape != (self.y.size, self.y.size):
                raise ValidationError("noise covariance shape does not match y")
            self.noise_cov = cov
            self._chol = np.linalg.cholesky(cov)

    @property
    def m(self):
        return self.y.size

    @property
    def is_scalar(self):
        return self._chol is None

    @property
    def covariance(self):
        if self.is_scalar:
            return self.noise_cov * np.eye(self.m)
        return self.noise_cov

    def precision_apply(self, r):
        """Gamma^{-1} r along the last axis."""
        r = np.asarray(r, dtype=np.float64)
        if self.is_scalar:
            return r / self.noise_cov
        flat = r.reshape(-1, self.m).T
        out = cho_solve((self._chol, True), flat).T
        return out.reshape(r.shape)

    def misfit(self, g):
        """0.5 * ||y - g||^2_Gamma; ``g`` may be a batch ``(n, m)``."""
        r = self.y - np.asarray(g, dtype=np.float64)
        return 0.5 * np.sum(r * self.precision_apply(r), axis=-1)


class ForwardModel:
    """Parameter-to-observable map ``G: R^d -> R^m``.

    Subclasses implement ``_evaluate`` and, when ``has_exact_gradient`` is
    true, ``_vjp`` (the action of the transposed Jacobian).  Every call to
    either is counted in ``n_solves``; for PDE models each is one linear solve.
    """

    has_exact_gradient = False
    name = "model"

    def __init__(self, d, m):
        self.d = int(d)
        self.m = int(m)
        self.n_solves = 0

    def evaluate(self, u):
        u = as_vector(u, "u", self.d)
        self.n_solves += 1
        return self._evaluate(u)

    def evaluate_many(self, U):
        U = as_matrix(U, "U", self.d)
        return np.stack([self.evaluate(u) for u in U])

    def vjp(self, u, w):
        """(dG/du)^T w"""
        if not self.has_exact_gradient:
            raise UnsupportedGradient(f"{self.name} does not provide exact gradients")
        u = as_vector(u, "u", self.d)
        w = as_vector(w, "w", self.m)
        self.n_solves += 1
        return self._vjp(u, w)

    def potential_and_grad(self, u, obs):
        r = obs.y - self.evaluate(u)
        pr = obs.precision_apply(r)
        return 0.5 * float(r @ pr), self.vjp(u, -pr)

    def _evaluate(self, u):
        raise NotImplementedError

    def _vjp(self, u, w):
        raise NotImplementedError


class LinearModel(ForwardModel):
    """G(u) = A u"""

    has_exact_gradient = True
    name = "linear"

    def __init__(self, A):
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise ValidationError("A must be a matrix")
        super().__init__(A.shape[1], A.shape[0])
        self.A = A

    def _evaluate(self, u):
        return self.A @ u

    def _vjp(self, u, w):
        return self.A.T @ w

    def evaluate_many(self, U):
        U = as_matrix(U, "U", self.d)
        self.n_solves += U.shape[0]
        return U @ self.A.T


def bbd_transform(u):
    """Raise even-numbered (1-based) coordinates to the second power."""
    u = np.asarray(u, dtype=np.float64)
    s = u.copy()
    s[..., 1::2] = u[..., 1::2] ** 2
    return s


class BBDModel(ForwardModel):
    """Banana-biscuit-doughnut map G(u) = A S(u)."""

    has_exact_gradient = True
    name = "bbd"

    def __init__(self, A):
        A = np.asarray(A, dtype=np.float64)
        super().__init__(A.shape[1], A.shape[0])
        self.A = A

    def _evaluate(self, u):
        return self.A @ bbd_transform(u)

    def _vjp(self, u, w):
        ds = np.ones_like(u)
        ds[1::2] = 2.0 * u[1::2]
        return ds * (self.A.T @ w)

    def evaluate_many(self, U):
        U = as_matrix(U, "U", self.d)
        self.n_solves += U.shape[0]
        return bbd_transform(U) @ self.A.T


def potential(model, u, obs):
    """Data misfit 0.5 * ||y - G(u)||^2_Gamma."""
    return float(obs.misfit(model.evaluate(u)))


def grad_potential(model, u, obs):
    """Gradient of ``potential`` with respect to ``u``."""
    if not model.has_exact_gradient:
        raise UnsupportedGradient(f"{model.name} does not provide exact gradients")
    return model.potential_and_grad(u, obs)[1]


def potential_and_grad(model, u, obs):
    if not model.has_exact_gradient:
        raise UnsupportedGradient(f"{model.name} does not provide exact gradients")
    return model.potential_and_grad(u, obs)


def linear_gaussian_posterior(A, noise_cov, prior_cov, y):
    """Posterior N(mu, Sigma) of the linear-Gaussian problem y = A u + eta.

    ``Sigma^{-1} = Sigma0^{-1} + A^T Gamma^{-1} A`` and ``mu = Sigma A^T Gamma^{-1} y``.
    """
    A = np.asarray(A, dtype=np.float64)
    m, d = A.shape
    y = as_vector(y, "y", m)
    gamma = noise_cov * np.eye(m) if np.ndim(noise_cov) == 0 else np.asarray(noise_cov, float)
    sigma0 = prior_cov * np.eye(d) if np.ndim(prior_cov) == 0 else np.asarray(prior_cov, float)
    gamma = check_spd(gamma, "noise covariance")
    sigma0 = check_spd(sigma0, "prior covariance")
    gi_a = np.linalg.solve(gamma, A)
    precision = np.linalg.inv(sigma0) + A.T @ gi_a
    precision = 0.5 * (precision + precision.T)
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (gi_a.T @ y)
    return mean, cov


def generate_data(model, u_true, noise_sd=None, snr=None, seed=0):
    """Synthetic observations y = G(u_true) + eta.

    Give either an absolute ``noise_sd`` or a signal-to-noise ratio ``snr``,
    in which case ``noise_sd = max(abs(G(u_true))) / snr``.
    """
    if (noise_sd is None) == (snr is None):
        raise ValidationError("specify exactly one of noise_sd or snr")
    g = model.evaluate(u_true)
    if snr is not None:
        noise_sd = float(np.max(np.abs(g))) / float(snr)
    noise_sd = float(noise_sd)
    if noise_sd < 0:
        raise ValidationError("noise_sd must be non-negative")
    if noise_sd == 0:
        # Gamma must stay SPD: unit variance stands in for noiseless data
        return ObservationSet(g.copy(), 1.0)
    rng = make_rng(seed)
    y = g + noise_sd * rng.standard_normal(g.shape)
    return ObservationSet(y, noise_sd**2)
