import numpy as np
import pytest
import scipy.sparse as sp

from dreamces.exceptions import SolverFailure, UnsupportedGradient, ValidationError
from dreamces.forward_models import (
    BBDModel,
    EllipticModel,
    ForwardModel,
    GaussianMeasure,
    LinearModel,
    ObservationSet,
    bbd_transform,
    exponential_kernel,
    generate_data,
    grad_potential,
    grid_points,
    linear_gaussian_posterior,
    make_benchmark,
    make_elliptic,
    potential,
    sample_prior,
)

from .conftest import central_diff, rel_err


# ---------------------------------------------------------------- evaluate / potential


def test_identity_linear_model_evaluates():
    model = LinearModel(np.eye(2))
    assert np.array_equal(model.evaluate([3.0, -1.0]), [3.0, -1.0])


def test_bbd_exponent_pattern():
    assert np.array_equal(bbd_transform(np.array([1.0, 2.0, 3.0, 4.0])), [1.0, 4.0, 3.0, 16.0])
    A = np.random.default_rng(0).uniform(size=(5, 4))
    model = BBDModel(A)
    assert np.allclose(model.evaluate([1.0, 2.0, 3.0, 4.0]), A @ [1.0, 4.0, 3.0, 16.0], rtol=0, atol=1e-14)


def test_bbd_transform_exact_on_random_input(rng):
    u = rng.standard_normal((10, 6))
    s = bbd_transform(u)
    assert np.array_equal(s[:, 0::2], u[:, 0::2])
    assert np.array_equal(s[:, 1::2], u[:, 1::2] ** 2)


def test_potential_zero_at_exact_fit():
    model = LinearModel(np.eye(2))
    obs = ObservationSet(np.array([1.0, 2.0]), 1.0)
    assert potential(model, [1.0, 2.0], obs) == 0.0


def test_potential_direct_substitution():
    model = LinearModel(np.eye(2))
    obs = ObservationSet(np.array([1.0, 1.0]), 1.0)
    assert potential(model, [0.0, 0.0], obs) == pytest.approx(1.0)


def test_potential_nonnegative(rng):
    model = LinearModel(rng.standard_normal((4, 3)))
    obs = ObservationSet(rng.standard_normal(4), np.diag([0.5, 1.0, 2.0, 0.1]))
    for _ in range(20):
        assert potential(model, rng.standard_normal(3), obs) >= 0.0


def test_linear_gradient_formula():
    model = LinearModel(np.eye(2))
    obs = ObservationSet(np.array([1.0, 1.0]), 1.0)
    assert np.allclose(grad_potential(model, [0.0, 0.0], obs), [-1.0, -1.0])


def test_full_noise_covariance_precision(rng):
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    obs = ObservationSet(rng.standard_normal(2), cov)
    r = rng.standard_normal((3, 2))
    assert np.allclose(obs.precision_apply(r), np.linalg.solve(cov, r.T).T)


@pytest.mark.parametrize("maker", ["linear", "bbd"])
def test_analytic_gradients_match_finite_differences(maker, rng):
    b = make_benchmark(maker)
    f = lambda u: potential(b.model, u, b.obs)
    for _ in range(5):
        u = rng.standard_normal(b.model.d)
        v = rng.standard_normal(b.model.d)
        fd = central_diff(f, u, v, 1e-5)
        assert abs(grad_potential(b.model, u, b.obs) @ v - fd) <= 1e-6 * max(abs(fd), 1.0)


def test_unsupported_gradient():
    class NoGrad(ForwardModel):
        def _evaluate(self, u):
            return u

    model = NoGrad(2, 2)
    obs = ObservationSet(np.zeros(2), 1.0)
    with pytest.raises(UnsupportedGradient):
        grad_potential(model, np.zeros(2), obs)


def test_evaluate_rejects_wrong_length():
    with pytest.raises(ValidationError):
        LinearModel(np.eye(3)).evaluate(np.zeros(2))


# ---------------------------------------------------------------- analytic posterior


def test_linear_gaussian_posterior_closed_form():
    mean, cov = linear_gaussian_posterior(np.eye(2), 0.1, 1.0, np.array([1.0, 2.0]))
    assert np.allclose(cov, np.eye(2) / 11.0)
    assert np.allclose(mean, [10.0 / 11.0, 20.0 / 11.0])


def test_linear_gaussian_posterior_matches_dense_inverse(rng):
    A = rng.uniform(size=(7, 3))
    gamma = np.diag(rng.uniform(0.1, 1.0, 7))
    sigma0 = np.array([[1.0, 0.2, 0.0], [0.2, 2.0, 0.1], [0.0, 0.1, 0.5]])
    y = rng.standard_normal(7)
    mean, cov = linear_gaussian_posterior(A, gamma, sigma0, y)
    ref_cov = np.linalg.inv(np.linalg.inv(sigma0) + A.T @ np.linalg.inv(gamma) @ A)
    assert np.allclose(cov, ref_cov, atol=1e-12)
    assert np.allclose(mean, ref_cov @ A.T @ np.linalg.inv(gamma) @ y, atol=1e-12)


def test_linear_gaussian_posterior_zero_data(rng):
    mean, _ = linear_gaussian_posterior(rng.standard_normal((5, 3)), 0.3, 1.0, np.zeros(5))
    assert np.array_equal(mean, np.zeros(3))


def test_linear_gaussian_posterior_rejects_non_spd():
    with pytest.raises(ValidationError):
        linear_gaussian_posterior(np.eye(2), -np.eye(2), 1.0, np.zeros(2))


def test_linear_benchmark_configuration(linear_bench):
    b = linear_bench
    assert (b.model.d, b.model.m) == (3, 100)
    assert np.array_equal(b.u_true, [-1.0, 0.0, 1.0])
    assert b.obs.noise_cov == pytest.approx(0.1)
    mu, cov = b.analytic_posterior()
    assert mu.shape == (3,) and cov.shape == (3, 3)


# ---------------------------------------------------------------- data generation


def test_noiseless_data_equals_model_output():
    model = LinearModel(np.eye(3))
    obs = generate_data(model, np.array([1.0, 2.0, 3.0]), noise_sd=0.0)
    assert np.array_equal(obs.y, [1.0, 2.0, 3.0])


def test_snr_sets_noise_from_max_observation():
    model = LinearModel(np.diag([1.0, -4.0]))
    obs = generate_data(model, np.array([1.0, 1.0]), snr=50.0, seed=0)
    assert obs.noise_cov == pytest.approx((4.0 / 50.0) ** 2)


def test_generate_data_requires_one_noise_spec():
    with pytest.raises(ValidationError):
        generate_data(LinearModel(np.eye(2)), np.zeros(2))


def test_generate_data_reproducible():
    model = LinearModel(np.eye(4))
    a = generate_data(model, np.ones(4), noise_sd=0.5, seed=3)
    b = generate_data(model, np.ones(4), noise_sd=0.5, seed=3)
    assert np.array_equal(a.y, b.y)


# ---------------------------------------------------------------- Gaussian measures


def test_scalar_prior_variance_moment():
    prior = GaussianMeasure.scalar(3, 1.0)
    draws = prior.sample(seed=1, size=100_000)
    n = draws.shape[0]
    # var of the sample variance of a standard normal is 2/n
    assert np.all(np.abs(draws.var(axis=0) - 1.0) < 3.0 * np.sqrt(2.0 / n))


def test_sample_prior_deterministic():
    prior = GaussianMeasure.exponential_grid(4)
    assert np.array_equal(sample_prior(prior, 7), sample_prior(prior, 7))
    assert not np.array_equal(sample_prior(prior, 7), sample_prior(prior, 8))


def test_exponential_grid_covariance_matches_kernel():
    n, sigma, length = 6, 1.25, 0.1
    prior = GaussianMeasure.exponential_grid(n, sigma, length)
    draws = prior.sample(seed=2, size=10_000)
    pts = grid_points(n)
    i, j = 0, 7
    dist = np.linalg.norm(pts[i] - pts[j])
    target = sigma**2 * np.exp(-dist / (2.0 * length))
    emp = np.mean(draws[:, i] * draws[:, j])
    # MC error of E[XY] for jointly Gaussian X, Y: sqrt((s_i^2 s_j^2 + c^2) / n)
    se = np.sqrt((sigma**4 + target**2) / draws.shape[0])
    assert abs(emp - target) < 3.0 * se


def test_square_root_consistency(rng):
    prior = GaussianMeasure.exponential_grid(5)
    C = prior.covariance
    for _ in range(5):
        x = rng.standard_normal(25)
        cx = C @ x
        assert np.linalg.norm(prior.sqrt_apply(prior.sqrt_apply(x)) - cx) / np.linalg.norm(cx) < 1e-10
        assert np.allclose(prior.invsqrt_apply(prior.sqrt_apply(x)), x, atol=1e-8)
        assert np.allclose(prior.apply(x), cx)
        assert np.allclose(prior.inv_apply(cx), x, atol=1e-8)


def test_exponential_kernel_diagonal():
    pts = grid_points(3)
    K = exponential_kernel(pts, 2.0, 0.3)
    assert np.allclose(np.diag(K), 4.0)
    assert np.allclose(K, K.T)


def test_measure_rejects_non_spd():
    with pytest.raises(ValidationError):
        GaussianMeasure.from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))


# ---------------------------------------------------------------- elliptic solver


def _dense_system(model, u):
    """Independent dense assembly of the same finite-volume system."""
    n, k = model.n, np.exp(u).reshape(model.n, model.n)
    N = n * n
    A = np.zeros((N + 1, N + 1))
    for i in range(n):
        for j in range(n):
            a = i * n + j
            for di, dj in ((0, 1), (1, 0)):
                ii, jj = i + di, j + dj
                if ii < n and jj < n:
                    b = ii * n + jj
                    t = 2.0 * k[i, j] * k[ii, jj] / (k[i, j] + k[ii, jj])
                    A[a, a] += t
                    A[b, b] += t
                    A[a, b] -= t
                    A[b, a] -= t
    w = model.boundary_weights
    A[:N, N] = w
    A[N, :N] = w
    return A


@pytest.mark.parametrize("field", ["zero", "random"])
def test_elliptic_solve_matches_dense_oracle(field, rng):
    model = EllipticModel(8)
    u = np.zeros(64) if field == "zero" else 0.5 * rng.standard_normal(64)
    A = _dense_system(model, u)
    ref = np.linalg.solve(A, np.append(model.forcing, 0.0))[:-1]
    p = model.solve(u)
    assert np.linalg.norm(p - ref) / np.linalg.norm(ref) < 1e-10
    assert np.allclose(model.evaluate(u), model.observation @ ref, rtol=1e-10, atol=1e-14)


def test_elliptic_boundary_mean_is_zero(rng):
    model = EllipticModel(10)
    p = model.solve(rng.standard_normal(100))
    assert abs(model.boundary_mean(p)) < 1e-8


def test_elliptic_forcing_has_zero_mean():
    model = EllipticModel(16)
    assert abs(model.forcing.sum()) < 1e-10


def test_elliptic_observation_rows_interpolate():
    model = EllipticModel(8)
    O = model.observation
    assert sp.issparse(O)
    assert np.allclose(np.asarray(O.sum(axis=1)).ravel(), 1.0)
    # a linear field is reproduced exactly by bilinear interpolation
    pts = model.points
    lin = 2.0 * pts[:, 0] - pts[:, 1]
    assert np.allclose(O @ lin, 2.0 * model.sensors[:, 0] - model.sensors[:, 1])


def test_elliptic_adjoint_gradient_matches_finite_differences(rng):
    b = make_elliptic(grid=8)
    f = lambda u: potential(b.model, u, b.obs)
    for _ in range(5):
        u = 0.5 * rng.standard_normal(64)
        v = rng.standard_normal(64)
        fd = central_diff(f, u, v, 1e-5)
        g = grad_potential(b.model, u, b.obs) @ v
        assert abs(g - fd) / abs(fd) < 1e-4


def test_elliptic_vjp_matches_dense_jacobian(rng):
    model = EllipticModel(6)
    u = 0.3 * rng.standard_normal(36)
    w = rng.standard_normal(model.m)
    J = np.column_stack([central_diff(model.evaluate, u, e, 1e-6) for e in np.eye(36)])
    assert rel_err(model.vjp(u, w), J.T @ w) < 1e-6


def test_elliptic_solve_counter():
    model = EllipticModel(4)
    obs = ObservationSet(np.zeros(model.m), 1.0)
    model.evaluate(np.zeros(16))
    model.potential_and_grad(np.zeros(16), obs)
    assert model.n_solves == 3


def test_elliptic_overflow_reports_solver_failure():
    model = EllipticModel(4)
    u = np.zeros(16)
    u[3] = 1e4
    with pytest.raises(SolverFailure) as info:
        model.evaluate(u)
    assert info.value.u[3] == 1e4


def test_elliptic_benchmark_calibrated_mean_improves_misfit():
    b = make_elliptic()
    assert b.model.d == 256 and b.model.m == 25
    assert potential(b.model, b.u_true, b.obs) < potential(b.model, np.zeros(256), b.obs)


def test_unknown_benchmark():
    with pytest.raises(ValidationError):
        make_benchmark("nope")


def test_bbd_benchmark_truth_pattern(bbd_bench):
    b = bbd_bench
    assert b.model.d == 4 and b.model.m == 100
    assert np.all(np.isin(b.u_true, np.arange(5)))
    assert b.obs.noise_cov == pytest.approx(1.0)
