import numpy as np
import pytest

from dreamces.exceptions import TrainingDivergence, ValidationError
from dreamces.nn import (
    ACTIVATIONS,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Network,
    Pool2D,
    Reshape,
    TrainConfig,
    conv_network,
    dense_network,
    get_activation,
    interpolate_widths,
    train_network,
)

from .conftest import central_diff, rel_err

POINTWISE = [a for a in ACTIVATIONS if a != "softmax"]


def _input_grad_check(net, x, rng, n_dirs=5):
    w = rng.standard_normal(net.output_shape)
    f = lambda v: float(np.sum(net.predict(v) * w))
    g = net.vjp(x, w)
    errs = []
    for _ in range(n_dirs):
        v = rng.standard_normal(x.shape)
        errs.append(abs(central_diff(f, x, v) - np.sum(g * v)) / max(abs(np.sum(g * v)), 1e-8))
    return max(errs)


def _param_grad_check(net, x, rng):
    w = rng.standard_normal((x.shape[0],) + net.output_shape)
    y, caches = net.forward(x)
    _, grads = net.backward(caches, w)
    worst = 0.0
    for layer, g in zip(net.layers, grads):
        for name, gp in g.items():
            p0 = layer.params[name].copy()
            v = rng.standard_normal(p0.shape)

            def f(p):
                layer.params[name] = p
                return float(np.sum(net.forward(x)[0] * w))

            fd = central_diff(f, p0, v)
            layer.params[name] = p0
            an = float(np.sum(gp * v))
            worst = max(worst, abs(fd - an) / max(abs(an), 1e-8))
    return worst


# ---------------------------------------------------------------- activations


def test_softplus_at_zero_is_log2():
    fwd, _, _ = get_activation("softplus")
    assert fwd(np.array([0.0]), 0.0)[0] == pytest.approx(np.log(2.0), abs=1e-15)


def test_activation_values():
    x = np.array([-2.0, 0.5])
    assert np.allclose(get_activation("relu")[0](x, 0), [0.0, 0.5])
    assert np.allclose(get_activation("leaky_relu", 0.1)[0](x, 0.1), [-0.2, 0.5])
    assert np.allclose(get_activation("elu")[0](x, 1.0), [np.expm1(-2.0), 0.5])
    s = get_activation("softmax")[0](np.array([[1.0, 2.0, 3.0]]), 0)
    assert s.sum() == pytest.approx(1.0) and np.all(np.diff(s) > 0)


def test_unknown_activation():
    with pytest.raises(ValidationError):
        get_activation("swish")


@pytest.mark.parametrize("name", list(ACTIVATIONS))
def test_activation_derivative_matches_fd(name, rng):
    fwd, bwd, a = get_activation(name, 0.3 if name in ("leaky_relu", "elu", "prelu") else None)
    x = rng.standard_normal((3, 4))
    x[np.abs(x) < 1e-3] += 0.01
    gy = rng.standard_normal(x.shape)
    gx, _ = bwd(x, fwd(x, a), gy, a)
    v = rng.standard_normal(x.shape)
    fd = central_diff(lambda z: float(np.sum(fwd(z, a) * gy)), x, v)
    assert abs(fd - np.sum(gx * v)) < 1e-7 * max(1.0, abs(fd))


# ---------------------------------------------------------------- layers


def test_dense_identity_weights():
    net = Network([Dense(3)], (3,))
    net.set_weights([{"W": np.eye(3), "b": np.zeros(3)}])
    x = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(net.predict(x), x)


def test_conv_identity_kernel():
    conv = Conv2D(1, 3, padding=1)
    net = Network([Reshape((1, 4, 5)), conv, Flatten()], (20,))
    K = np.zeros((1, 1, 3, 3))
    K[0, 0, 1, 1] = 1.0
    net.set_weights([{}, {"K": K, "b": np.zeros(1)}, {}])
    x = np.arange(20.0)
    assert np.allclose(net.predict(x), x)


def test_conv_matches_explicit_correlation(rng):
    conv = Conv2D(2, (2, 3), stride=2, padding=1, activation="linear")
    net = Network([conv], (3, 6, 7), seed=1)
    x = rng.standard_normal((2, 3, 6, 7))
    y = net.predict(x)
    K, b = conv.params["K"], conv.params["b"]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    _, ho, wo = conv.out_shape
    ref = np.zeros((2, 2, ho, wo))
    for n in range(2):
        for f in range(2):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[n, :, 2 * i:2 * i + 2, 2 * j:2 * j + 3]
                    ref[n, f, i, j] = np.sum(patch * K[f]) + b[f]
    assert np.allclose(y, ref, atol=1e-13)


def test_conv_as_toeplitz_matrix(rng):
    # a linear conv is a matrix; its Jacobian must equal that matrix column by column
    net = Network([Reshape((1, 5, 5)), Conv2D(1, 3), Flatten()], (25,), seed=2)
    J = net.jacobian(np.zeros(25))
    cols = np.stack([net.predict(e) - net.predict(np.zeros(25)) for e in np.eye(25)], axis=1)
    assert np.allclose(J, cols, atol=1e-13)


def test_max_pool_routes_gradient_to_argmax():
    pool = Pool2D(2, "max")
    net = Network([pool], (1, 4, 4))
    x = np.arange(16.0).reshape(1, 1, 4, 4)
    y, caches = net.forward(x)
    assert np.array_equal(y[0, 0], [[5.0, 7.0], [13.0, 15.0]])
    gx, _ = net.backward(caches, np.ones_like(y))
    expected = np.zeros((4, 4))
    expected[[1, 1, 3, 3], [1, 3, 1, 3]] = 1.0
    assert np.array_equal(gx[0, 0], expected)


def test_avg_pool_drops_ragged_edge():
    net = Network([Pool2D(2, "avg")], (1, 5, 5))
    x = np.ones((1, 1, 5, 5))
    y, caches = net.forward(x)
    assert y.shape == (1, 1, 2, 2) and np.allclose(y, 1.0)
    gx, _ = net.backward(caches, np.ones_like(y))
    assert np.allclose(gx[0, 0, :4, :4], 0.25) and np.all(gx[0, 0, 4] == 0) and np.all(gx[0, 0, :, 4] == 0)


def test_dropout_identity_at_inference(rng):
    net = Network([Dense(4, "tanh"), Dropout(0.5), Dense(2)], (3,))
    x = rng.standard_normal((5, 3))
    y1, _ = net.forward(x)
    y2, _ = net.forward(x, training=True, rng=np.random.default_rng(0))
    assert np.allclose(net.predict(x), y1) and not np.allclose(y1, y2)
    with pytest.raises(ValidationError):
        net.forward(x, training=True)


def test_layer_validation():
    with pytest.raises(ValidationError):
        Network([Dense(3)], (2, 2))
    with pytest.raises(ValidationError):
        Network([Conv2D(1, 5)], (1, 3, 3))
    with pytest.raises(ValidationError):
        Pool2D(2, "min")
    with pytest.raises(ValidationError):
        Dropout(1.0)
    with pytest.raises(ValidationError):
        Network([Reshape((2, 3))], (5,))
    with pytest.raises(ValidationError):
        Network([], (2,))


# ---------------------------------------------------------------- gradients


@pytest.mark.parametrize("act", POINTWISE + ["softmax"])
def test_dense_network_input_and_param_gradients(act, rng):
    layers = [Dense(6, act, 0.2 if act in ("leaky_relu", "elu") else None), Dense(5, "tanh"), Dense(3)]
    net = Network(layers, (4,), seed=3)
    for _ in range(5):
        x = rng.standard_normal(4)
        assert _input_grad_check(net, x, rng) < 1e-6
    assert _param_grad_check(net, rng.standard_normal((3, 4)), rng) < 1e-6


@pytest.mark.parametrize("mode", ["max", "avg"])
def test_conv_network_gradients(mode, rng):
    layers = [Reshape((1, 6, 6)), Conv2D(3, 3, padding=1, activation="softplus"), Pool2D(2, mode),
              Conv2D(2, 2, stride=1, activation="tanh"), Flatten(), Dense(4, "softmax"), Dense(3)]
    net = Network(layers, (36,), seed=4)
    for _ in range(5):
        assert _input_grad_check(net, rng.standard_normal(36), rng) < 1e-6
    assert _param_grad_check(net, rng.standard_normal((2, 36)), rng) < 1e-6


def test_prelu_slope_gradient(rng):
    net = Network([Dense(5, "prelu"), Dense(2)], (3,), seed=5)
    assert "alpha" in net.layers[0].params
    assert _param_grad_check(net, rng.standard_normal((4, 3)), rng) < 1e-6


def test_backward_without_params_skips_weight_gradients(rng):
    net = dense_network(3, 2, 2, "tanh")
    x = rng.standard_normal((2, 3))
    _, caches = net.forward(x)
    g_full, grads = net.backward(caches, np.ones((2, 2)))
    g_only, none = net.backward(caches, np.ones((2, 2)), params=False)
    assert np.array_equal(g_full, g_only)
    assert all(not g for g in none) and all(g for g in grads)


def test_jacobian_forward_mode_matches_reverse(rng):
    net = dense_network(3, 12, 3, "elu")  # n_in < n_out: forward-mode path
    x = rng.standard_normal(3)
    J = net.jacobian(x)
    rows = np.stack([net.vjp(x, e) for e in np.eye(12)])
    assert np.allclose(J, rows, atol=1e-13)


def test_jacobian_reverse_mode_matches_fd(rng):
    net = dense_network(8, 3, 2, "softplus")
    x = rng.standard_normal(8)
    J = net.jacobian(x)
    fd = np.stack([central_diff(net.predict, x, e) for e in np.eye(8)], axis=1)
    assert rel_err(J, fd) < 1e-6


def test_linearize_matches_predict_and_vjp(rng):
    net = dense_network(5, 4, 3, "tanh")
    x, w = rng.standard_normal(5), rng.standard_normal(4)
    y, pullback = net.linearize(x)
    assert np.array_equal(y, net.predict(x))
    assert np.allclose(pullback(w), net.vjp(x, w), atol=1e-14)


# ---------------------------------------------------------------- builders and training


def test_interpolate_widths():
    assert interpolate_widths(10, 2, 4) == [8, 6, 4, 2]
    with pytest.raises(ValidationError):
        interpolate_widths(3, 1, 0)


def test_conv_network_shapes():
    net = conv_network((12, 12), 5, filters=(2, 3), latent=7)
    assert net.predict(np.zeros(144)).shape == (5,)
    assert net.predict(np.zeros((3, 144))).shape == (3, 5)


def test_manifest_round_trip(rng):
    net = conv_network((6, 6), 3, filters=(2,), latent=4)
    clone = Network.from_manifest(net.manifest(), net.get_weights())
    x = rng.standard_normal((2, 36))
    assert np.array_equal(clone.predict(x), net.predict(x))


def test_training_fits_linear_map(rng):
    A = rng.standard_normal((2, 4))
    X = rng.standard_normal((200, 4))
    net = dense_network(4, 2, 1, output_activation="linear")
    res = train_network(net, X, X @ A.T, TrainConfig(learning_rate=1e-2, epochs=150, seed=0))
    assert res.n_train == 150 and res.n_test == 50
    assert len(res.train_loss) == 151
    assert res.final_train < 1e-4 * res.train_loss[0] and res.final_test < 1e-3


def test_training_is_deterministic(rng):
    X, Y = rng.standard_normal((40, 3)), rng.standard_normal((40, 2))
    cfg = TrainConfig(epochs=5, seed=2)
    a, b = dense_network(3, 2, 2, seed=1), dense_network(3, 2, 2, seed=1)
    ra, rb = train_network(a, X, Y, cfg), train_network(b, X, Y, cfg)
    assert ra.train_loss == rb.train_loss


def test_training_divergence_raises(rng):
    X = rng.standard_normal((20, 2))
    net = dense_network(2, 1, 1)
    with pytest.raises(TrainingDivergence):
        train_network(net, X, 1e200 * X[:, :1], TrainConfig(optimizer="sgd", learning_rate=1e3, epochs=3))


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(split=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(optimizer="rmsprop")
