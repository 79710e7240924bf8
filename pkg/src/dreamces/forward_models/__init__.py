from .benchmarks import BENCHMARKS, Benchmark, make_bbd, make_benchmark, make_elliptic, make_linear
from .elliptic import EllipticModel, lattice_sensors, plume_forcing, two_bump_field
from .models import (
    BBDModel,
    ForwardModel,
    LinearModel,
    ObservationSet,
    bbd_transform,
    generate_data,
    grad_potential,
    linear_gaussian_posterior,
    potential,
    potential_and_grad,
)
from .prior import GaussianMeasure, exponential_kernel, grid_points


def sample_prior(measure, seed):
    """One draw from ``measure``; identical for identical seeds."""
    return measure.sample(seed)


__all__ = [
    "BENCHMARKS", "Benchmark", "BBDModel", "EllipticModel", "ForwardModel", "GaussianMeasure",
    "LinearModel", "ObservationSet", "bbd_transform", "exponential_kernel", "generate_data",
    "grad_potential", "grid_points", "lattice_sensors", "linear_gaussian_posterior",
    "make_bbd", "make_benchmark", "make_elliptic", "make_linear", "plume_forcing",
    "potential", "potential_and_grad", "sample_prior", "two_bump_field",
]
