"""Named benchmark problems: ``linear``, ``bbd`` and ``elliptic``."""

from dataclasses import dataclass, field

import numpy as np

from .._validation import make_rng
from ..exceptions import ConfigError
from .elliptic import EllipticModel, two_bump_field
from .models import BBDModel, LinearModel, ObservationSet, generate_data, linear_gaussian_posterior
from .prior import GaussianMeasure, grid_points


@dataclass
class Benchmark:
    name: str
    model: object
    prior: GaussianMeasure
    obs: ObservationSet
    u_true: np.ndarray
    info: dict = field(default_factory=dict)

    def analytic_posterior(self):
        """Exact posterior (mean, covariance); only defined for ``linear``."""
        if self.name != "linear":
            raise ConfigError("analytic posterior only exists for the linear benchmark")
        return linear_gaussian_posterior(
            self.model.A, self.obs.noise_cov, self.prior.covariance, self.obs.y
        )


def make_linear(dim=3, n_obs=100, noise_variance=0.1, prior_variance=1.0, truth=(-1.0, 0.0, 1.0), seed=2021):
    rng = make_rng(seed, 0)
    A = rng.uniform(0.0, 1.0, size=(n_obs, dim))
    model = LinearModel(A)
    u_true = np.asarray(truth, dtype=np.float64)
    if u_true.size != dim:
        raise ConfigError(f"truth has length {u_true.size}, expected {dim}")
    obs = generate_data(model, u_true, noise_sd=np.sqrt(noise_variance), seed=make_rng(seed, 1))
    model.n_solves = 0
    prior = GaussianMeasure.scalar(dim, np.sqrt(prior_variance))
    return Benchmark("linear", model, prior, obs, u_true)


def make_bbd(dim=4, n_obs=100, noise_variance=1.0, prior_variance=1.0, truth=None, seed=2027):
    rng = make_rng(seed, 0)
    A = rng.uniform(0.0, 1.0, size=(n_obs, dim))
    if truth is None:
        u_true = rng.integers(0, dim + 1, size=dim).astype(np.float64)
    else:
        u_true = np.asarray(truth, dtype=np.float64)
    model = BBDModel(A)
    obs = generate_data(model, u_true, noise_sd=np.sqrt(noise_variance), seed=make_rng(seed, 1))
    model.n_solves = 0
    prior = GaussianMeasure.scalar(dim, np.sqrt(prior_variance))
    return Benchmark("bbd", model, prior, obs, u_true)


def make_elliptic(grid=16, data_grid_factor=2, sigma_u=1.25, corr_length=0.0625, snr=50.0, seed=2021):
    """Elliptic benchmark; data come from a grid ``data_grid_factor`` times finer."""
    fine = EllipticModel(grid * data_grid_factor)
    u_fine = two_bump_field(grid_points(fine.n))
    obs = generate_data(fine, u_fine, snr=snr, seed=make_rng(seed, 1))
    model = EllipticModel(grid)
    prior = GaussianMeasure.exponential_grid(grid, sigma_u, corr_length)
    u_true = two_bump_field(grid_points(grid))
    return Benchmark("elliptic", model, prior, obs, u_true, {"grid": (grid, grid)})


BENCHMARKS = {"linear": make_linear, "bbd": make_bbd, "elliptic": make_elliptic}


def make_benchmark(name, **params):
    try:
        factory = BENCHMARKS[name]
    except KeyError:
        raise ConfigError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for benchmark {name!r}: {exc}") from exc
