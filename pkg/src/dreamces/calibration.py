"""Ensemble Kalman inversion (EKI) and the ensemble Kalman sampler (EKS).

Both produce a :class:`CalibrationHistory`: every ensemble visited, with the
forward values computed exactly once per member per iteration.  Those pairs
are the training set for the emulator and the autoencoder.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._validation import as_matrix, make_rng
from .exceptions import RegularizationFailure, ValidationError


@dataclass
class Ensemble:
    members: np.ndarray
    forward_values: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        self.members = as_matrix(self.members, "members", min_rows=2)
        self.forward_values = as_matrix(self.forward_values, "forward_values", min_rows=2)
        if self.members.shape[0] != self.forward_values.shape[0]:
            raise ValidationError("members and forward_values disagree on ensemble size")

    @property
    def size(self):
        return self.members.shape[0]

    def mean(self):
        return self.members.mean(axis=0)

    def std(self):
        return self.members.std(axis=0)

    def covariance(self):
        dev = self.members - self.mean()
        return dev.T @ dev / self.size


@dataclass
class CalibrationHistory:
    ensembles: list
    timesteps: list = field(default_factory=list)
    method: str = "eks"

    @property
    def params(self):
        """(N+1, J, d)"""
        return np.stack([e.members for e in self.ensembles])

    @property
    def outputs(self):
        """(N+1, J, m)"""
        return np.stack([e.forward_values for e in self.ensembles])

    @property
    def final(self):
        return self.ensembles[-1]

    def pairs(self):
        """All (u, G(u)) pairs flattened to ``(J*(N+1), d)`` and ``(J*(N+1), m)``."""
        P, O = self.params, self.outputs
        return P.reshape(-1, P.shape[-1]), O.reshape(-1, O.shape[-1])

    @classmethod
    def from_arrays(cls, params, outputs, timesteps=(), method="eks"):
        ens = [Ensemble(p, o, n) for n, (p, o) in enumerate(zip(params, outputs))]
        return cls(ens, list(timesteps), method)


def _evaluate(model, members):
    return model.evaluate_many(members)


def eki_step(ens, model, obs, h, sigma="zero", rng=None):
    """One EKI update.

    ``sigma="zero"`` gives the deterministic optimisation flavour; ``"gamma"``
    perturbs the data with N(0, Gamma / h) per member.
    """
    if h <= 0:
        raise ValidationError("EKI step h must be positive")
    U, G = ens.members, ens.forward_values
    J = ens.size
    du = U - U.mean(axis=0)
    dg = G - G.mean(axis=0)
    c_up = du.T @ dg / J
    c_pp = dg.T @ dg / J
    y = np.broadcast_to(obs.y, G.shape)
    if sigma == "gamma":
        rng = make_rng(0 if rng is None else rng)
        L = np.linalg.cholesky(obs.covariance)
        y = y + rng.standard_normal(G.shape) @ L.T / np.sqrt(h)
    elif sigma != "zero":
        raise ValidationError(f"sigma must be 'zero' or 'gamma', got {sigma!r}")
    try:
        gain_rhs = cho_solve(cho_factor(c_pp + obs.covariance / h), (y - G).T)
    except LinAlgError as exc:
        raise RegularizationFailure(str(exc), ens.iteration) from exc
    new = U + (c_up @ gain_rhs).T
    return Ensemble(new, _evaluate(model, new), ens.iteration + 1)


def drift_coefficients(ens, obs):
    """D[j, k] = <G_k - Gbar, y - G_j>_Gamma / J."""
    G = ens.forward_values
    dg = G - G.mean(axis=0)
    resid = obs.y - G
    return obs.precision_apply(resid) @ dg.T / ens.size


def adaptive_timestep(drift_norms, delta0=1.0, eps=1e-10, dt_max=1.0):
    """delta0 / (max drift norm + eps), capped at ``dt_max``."""
    drift_norms = np.asarray(drift_norms, dtype=np.float64)
    if drift_norms.size == 0:
        raise ValidationError("need at least one drift magnitude")
    return float(min(delta0 / (np.max(drift_norms) + eps), dt_max))


def eks_step(ens, model, obs, prior, rng=None, dt=None, delta0=1.0):
    """One linearly implicit split step of the ensemble Kalman sampler.

    Returns the new ensemble and the time step used.  The implicit solve
    ``(I + dt C_n C^{-1}) u* = rhs`` is carried out as
    ``u* = C (C + dt C_n)^{-1} rhs`` so the prior precision is never formed.
    """
    rng = make_rng(0 if rng is None else rng)
    U = ens.members
    J, d = U.shape
    D = drift_coefficients(ens, obs)
    if dt is None:
        dt = adaptive_timestep([np.linalg.norm(D)], delta0)
    dev = U - U.mean(axis=0)
    c_n = dev.T @ dev / J
    rhs = U + dt * (D @ U)
    C = prior.covariance
    try:
        fac = cho_factor(C + dt * c_n)
        star = cho_solve(fac, rhs.T).T @ C
    except LinAlgError as exc:
        raise RegularizationFailure(f"implicit EKS solve failed: {exc}", ens.iteration) from exc
    # sqrt(2 dt C_n) xi, drawn in the span of the deviations
    noise = np.sqrt(2.0 * dt / J) * rng.standard_normal((J, J)) @ dev
    new = star + noise
    return Ensemble(new, _evaluate(model, new), ens.iteration + 1), dt


def run_calibration(model, obs, prior, method="eks", J=100, N=50, seed=0, h=None, sigma="zero"):
    """Run ``N`` iterations of EKI or EKS from ``J`` prior draws."""
    if J < 2:
        raise ValidationError("ensemble size J must be >= 2")
    if N < 1:
        raise ValidationError("number of iterations N must be >= 1")
    method = method.lower()
    if method not in ("eki", "eks"):
        raise ValidationError(f"method must be 'eki' or 'eks', got {method!r}")
    rng = make_rng(seed, 7)
    members = prior.sample(rng, size=J)
    ens = Ensemble(members, _evaluate(model, members), 0)
    history = CalibrationHistory([ens], [], method)
    for _ in range(N):
        if method == "eki":
            step = 1.0 / N if h is None else h
            ens = eki_step(ens, model, obs, step, sigma, rng)
        else:
            ens, step = eks_step(ens, model, obs, prior, rng)
        history.ensembles.append(ens)
        history.timesteps.append(step)
    return history
