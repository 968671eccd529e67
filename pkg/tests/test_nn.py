import json

import numpy as np
import pytest

from crossaug.nn import (Activation, Adam, Conv2D, Dense, DivergenceError, Dropout, Flatten, MaxPool2x2,
                         Network, TrainConfig, UsageError, compute_loss, grad_check, load_weights,
                         save_weights, train)
from crossaug.nn.gradcheck import LAYER_CHECKS, layer_suite, relative_error
from crossaug.nn.layers import softmax
from crossaug.tensor import DomainError, Rng, ShapeError


def test_dense_forward_hand_values():
    net = Network([Dense(2)], (3,))
    W, b = net.parameters()
    W[:] = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    b[:] = [0.5, -0.5]
    y, _ = net.forward(np.array([[1.0, 2.0, 3.0]]))
    np.testing.assert_array_equal(y, [[4.5, 4.5]])


def test_conv_same_padding_hand_values():
    # 3x3 all-ones kernel over a 3x3 all-ones image: corner 4, edge 6, centre 9
    net = Network([Conv2D(1, 3)], (3, 3, 1))
    W, b = net.parameters()
    W[:] = 1.0
    y, _ = net.forward(np.ones((1, 3, 3, 1)))
    np.testing.assert_array_equal(y[0, :, :, 0], [[4, 6, 4], [6, 9, 6], [4, 6, 4]])


def test_maxpool_values_and_odd_crop():
    x = np.arange(25, dtype=float).reshape(1, 5, 5, 1)
    y, _ = Network([MaxPool2x2()], (5, 5, 1)).forward(x)
    np.testing.assert_array_equal(y[0, :, :, 0], [[6, 8], [16, 18]])


def test_maxpool_tie_routes_gradient_to_first():
    net = Network([MaxPool2x2()], (2, 2, 1))
    y, cache = net.forward(np.ones((1, 2, 2, 1)))
    dx, _ = net.backward(cache, np.ones_like(y))
    np.testing.assert_array_equal(dx[0, :, :, 0], [[1, 0], [0, 0]])


def test_softmax_rows_sum_to_one_and_stable():
    z = Rng(0).normal((50, 10)) * 300
    p = softmax(z)
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-12
    assert np.all(np.isfinite(p))


def test_dropout_rate_and_scaling():
    net = Network([Dropout(0.3)], (1000,), Rng(0))
    x = np.ones((50, 1000))
    y, _ = net.forward(x, Rng(1))
    dropped = np.mean(y == 0)
    assert abs(dropped - 0.3) < 0.01
    np.testing.assert_allclose(y[y != 0], 1 / 0.7)
    frozen = net.freeze()
    np.testing.assert_array_equal(frozen.predict(x), x)


def test_losses_hand_values():
    p = np.array([[0.5, 0.25]])
    t = np.array([[1.0, 0.0]])
    loss, grad = compute_loss("mse", p, t)
    assert loss == pytest.approx((0.25 + 0.0625) / 2)
    np.testing.assert_allclose(grad, [[-0.5, 0.25]])
    loss, _ = compute_loss("bce", p, t)
    assert loss == pytest.approx(-(np.log(0.5) + np.log(0.75)) / 2)
    loss, _ = compute_loss("softmax_ce", p, t)
    assert loss == pytest.approx(np.log(2))
    with pytest.raises(DomainError):
        compute_loss("bce", np.array([[1.0]]), np.array([[1.0]]))


def test_adam_first_step_is_lr_times_sign():
    p = [np.array([1.0, -2.0, 3.0])]
    Adam(lr=0.1).step(p, [np.array([0.5, -4.0, 0.0])])
    np.testing.assert_allclose(p[0], [0.9, -1.9, 3.0], atol=1e-6)


def test_adam_minimises_quadratic():
    p = [np.array([5.0, -3.0])]
    opt = Adam(lr=0.1)
    for _ in range(500):
        opt.step(p, [2 * p[0]])
    assert np.max(np.abs(p[0])) < 1e-2


@pytest.mark.parametrize("kind", LAYER_CHECKS)
def test_grad_check_each_kind(kind):
    assert layer_suite(range(3), [kind])[kind] < 1e-4


def test_grad_check_detects_wrong_gradient():
    net = Network([Dense(3), Activation("relu"), Dense(2)], (4,), Rng(0))
    x, t = Rng(1).normal((5, 4)), Rng(2).normal((5, 2))
    assert grad_check(net, x, t, "mse") < 1e-6
    layer = net.layers[0]
    original = layer.backward
    layer.backward = lambda cache, dy: (lambda dx, g: (dx, {k: v * 1.1 for k, v in g.items()}))(*original(cache, dy))
    assert grad_check(net, x, t, "mse") > 1e-3


def test_relative_error_floor():
    assert relative_error([1e-12], [2e-12]) < 1e-4
    assert relative_error([1.0], [1.1]) == pytest.approx(0.1 / 1.1)


def test_frozen_network_is_read_only():
    net = Network([Dense(2)], (3,), Rng(0)).freeze()
    with pytest.raises(ValueError):
        net.parameters()[0][0, 0] = 1.0
    y, cache = net.forward(np.ones((1, 3)))
    net.backward(cache, np.ones_like(y))
    with pytest.raises(UsageError):
        net.backward(cache, np.ones_like(y))


def test_shape_error_names_layer():
    net = Network([Dense(2), Dense(3)], (3,), Rng(0))
    with pytest.raises(ShapeError, match="layer 0"):
        net.forward(np.ones((1, 4)))


def _fit(seed):
    x = Rng(10).normal((64, 4))
    y = (x[:, :1] > 0) * 1.0
    net = Network([Dense(8), Activation("relu"), Dense(1), Activation("sigmoid")], (4,), Rng(seed))
    return train(net, x, y, TrainConfig(epochs=30, batch_size=16, learning_rate=1e-2, loss="bce"), Rng(seed))


def test_train_is_deterministic_and_learns():
    (a, ha), (b, hb) = _fit(3), _fit(3)
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)
    assert ha.loss == hb.loss
    assert ha.loss[-1] < 0.5 * ha.loss[0]
    assert a.frozen


def test_train_rejects_oversized_batch_and_divergence():
    net = Network([Dense(1)], (2,), Rng(0))
    with pytest.raises(ValueError, match="batch_size"):
        train(net, np.ones((4, 2)), np.ones((4, 1)), TrainConfig(epochs=1, batch_size=8), Rng(0))
    with pytest.raises(DivergenceError):
        with np.errstate(over="ignore", invalid="ignore"):
            train(net, np.full((4, 2), 1e200), np.ones((4, 1)), TrainConfig(epochs=1, batch_size=2), Rng(0))


def test_weights_round_trip(tmp_path):
    net = Network([Conv2D(2), MaxPool2x2(), Flatten(), Dense(3), Dropout(0.5), Activation("softmax")],
                  (4, 4, 1), Rng(0)).freeze()
    path = tmp_path / "w.json"
    save_weights(path, {"clf": net}, {"note": "x"})
    nets, header = load_weights(path)
    assert header["note"] == "x"
    x = Rng(1).uniform((2, 4, 4, 1))
    np.testing.assert_array_equal(nets["clf"].predict(x), net.predict(x))
    assert json.loads(path.read_text())["format"] == "crossaug-weights"
