"""Central finite-difference gradient verification."""
from __future__ import annotations

import numpy as np

from crossaug.nn.losses import compute_loss
from crossaug.nn.network import Network
from crossaug.tensor import Rng

STEP = 1e-5
# Below this magnitude gradients are compared absolutely; FD noise at
# STEP=1e-5 is around 1e-10, so a pure ratio would be meaningless there.
FLOOR = 1e-7


def relative_error(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), FLOOR)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_gradient(f, array: np.ndarray, step: float = STEP) -> np.ndarray:
    """d f() / d array by central differences, perturbing ``array`` in place."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = f()
        flat[i] = old - step
        down = f()
        flat[i] = old
        g[i] = (up - down) / (2.0 * step)
    return grad


def grad_check(net: Network, x, target, loss_kind: str, step: float = STEP,
               include_input: bool = True, seed: int = 0) -> float:
    """Worst relative error between analytic and finite-difference gradients.

    Every parameter (and the input, unless ``include_input`` is false) is
    checked. Training-mode dropout reuses the same mask on every evaluation
    by reseeding the generator.
    """
    training = net.training
    work = net.unfrozen_copy()
    x = np.array(x, dtype=np.float64)

    def loss_only():
        out, _ = work.forward(x, Rng(seed), training=training)
        return compute_loss(loss_kind, out, target)[0]

    out, cache = work.forward(x, Rng(seed), training=training)
    _, dout = compute_loss(loss_kind, out, target)
    dx, grads = work.backward(cache, dout)

    worst = 0.0
    for p, g in zip(work.parameters(), work.flat_grads(grads)):
        worst = max(worst, relative_error(g, numeric_gradient(loss_only, p, step)))
    if include_input:
        worst = max(worst, relative_error(dx, numeric_gradient(loss_only, x, step)))
    return worst


LAYER_CHECKS = ("dense", "conv2d", "maxpool", "dropout", "relu", "sigmoid", "softmax",
                "softmax_ce", "mse", "bce", "vae")


def _case(kind: str, rng: Rng):
    """``(network, input, target, loss)`` exercising one layer or loss kind."""
    from crossaug.nn.layers import Activation, Conv2D, Dense, Dropout, Flatten, MaxPool2x2

    x = rng.normal((4, 5))
    unit = rng.uniform((4, 3)) * 0.8 + 0.1
    onehot = np.eye(3)[rng.integers(0, 3, 4)]
    if kind in ("conv2d", "maxpool"):
        layers = [Conv2D(2, 3)] + ([MaxPool2x2()] if kind == "maxpool" else []) + [Flatten(), Dense(3)]
        return Network(layers, (6, 6, 2), rng.child(0)), rng.normal((3, 6, 6, 2)), rng.normal((3, 3)), "mse"
    layers, target, loss = {
        "dense": ([Dense(3)], rng.normal((4, 3)), "mse"),
        "dropout": ([Dense(6), Dropout(0.4), Dense(3)], rng.normal((4, 3)), "mse"),
        "relu": ([Dense(6), Activation("relu"), Dense(3)], rng.normal((4, 3)), "mse"),
        "sigmoid": ([Dense(3), Activation("sigmoid")], unit, "bce"),
        "softmax": ([Dense(3), Activation("softmax")], unit, "mse"),
        "softmax_ce": ([Dense(6), Activation("relu"), Dense(3), Activation("softmax")], onehot,
                       "softmax_ce"),
        "mse": ([Dense(3)], rng.normal((4, 3)), "mse"),
        "bce": ([Dense(3), Activation("sigmoid")], (rng.uniform((4, 3)) > 0.5) * 1.0, "bce"),
    }[kind]
    # an unfrozen network runs in training mode, so dropout masks are live
    return Network(layers, (5,), rng.child(0)), x, target, loss


def relu_margin(net: Network, x) -> float:
    """Smallest |input| reaching any ReLU; FD checks are invalid below ``STEP``."""
    margin = np.inf
    for layer in net.layers:
        if getattr(layer, "function", None) == "relu":
            margin = min(margin, float(np.min(np.abs(x))))
        x, _ = layer.forward(x, False, None)
    return margin


def layer_suite(seeds=range(20), kinds=LAYER_CHECKS) -> dict[str, float]:
    """Worst relative error per layer/loss kind over ``seeds``."""
    from crossaug.autoencoder import build_mapping, grad_check_mapping

    worst = {}
    for kind in kinds:
        errs = []
        for seed in seeds:
            rng = Rng(seed)
            if kind == "vae":
                model = build_mapping("vae", 6, 4, hidden=[5], latent_dim=3, rng=rng.child(0))
                y = rng.uniform((4, 4)) * 0.8 + 0.1
                # redraw inputs that land within a few FD steps of a ReLU kink
                for attempt in range(10):
                    x = rng.child(1).child(attempt).uniform((4, 6))
                    z = model.forward(x, eps=Rng(seed).normal((4, 3)))[2].z
                    if min(relu_margin(model.encoder, x), relu_margin(model.decoder, z)) > 10 * STEP:
                        break
                errs.append(grad_check_mapping(model, x, y, "bce", beta=1.0, seed=seed))
            else:
                net, x, target, loss = _case(kind, rng)
                errs.append(grad_check(net, x, target, loss, seed=seed))
        worst[kind] = max(errs)
    return worst
