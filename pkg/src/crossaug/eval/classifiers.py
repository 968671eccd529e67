"""Default classifiers and their training wrapper."""
from __future__ import annotations

import numpy as np

from crossaug.nn import Activation, Conv2D, Dense, Dropout, Flatten, MaxPool2x2, Network, TrainConfig, train
from crossaug.tensor import Rng

KINDS = ("image_cnn", "tabular_mlp")


class DegenerateLabelsError(ValueError):
    pass


def image_cnn(input_shape, n_classes: int, filters=(16, 32), kernel_size=3, dense=128,
              dropout=(0.25, 0.5), rng: Rng | None = None) -> Network:
    """conv-relu-pool x2, flatten, dropout, dense-relu, dropout, softmax."""
    layers = []
    for f in filters:
        layers += [Conv2D(f, kernel_size), Activation("relu"), MaxPool2x2()]
    layers += [Flatten(), Dropout(dropout[0]), Dense(dense), Activation("relu"),
               Dropout(dropout[1]), Dense(n_classes), Activation("softmax")]
    return Network(layers, input_shape, rng or Rng(0))


def tabular_mlp(width: int, n_classes: int, hidden=(64, 32), dropout=0.3,
                rng: Rng | None = None) -> Network:
    layers = []
    for h in hidden:
        layers += [Dense(h), Activation("relu"), Dropout(dropout)]
    layers += [Dense(n_classes), Activation("softmax")]
    return Network(layers, (width,), rng or Rng(0))


def one_hot(labels, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[np.asarray(labels, dtype=np.int64)]


def train_classifier(kind: str, x, labels, cfg: TrainConfig, rng: Rng, n_classes: int | None = None,
                     **arch) -> Network:
    """Build the ``kind`` network for ``x`` and train it with softmax cross-entropy."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise DegenerateLabelsError("training labels contain a single class")
    n_classes = n_classes or int(labels.max()) + 1
    x = np.asarray(x, dtype=np.float64)
    if kind == "image_cnn":
        net = image_cnn(x.shape[1:], n_classes, rng=rng.child(0), **arch)
    elif kind == "tabular_mlp":
        net = tabular_mlp(x.shape[1], n_classes, rng=rng.child(0), **arch)
    else:
        raise ValueError(f"classifier kind must be one of {KINDS}")
    if cfg.loss != "softmax_ce":
        cfg = TrainConfig(**{**cfg.to_dict(), "loss": "softmax_ce"})
    trained, _ = train(net, x, one_hot(labels, n_classes), cfg, rng.child(1))
    return trained


def predict_labels(net: Network, x, batch_size: int = 512) -> np.ndarray:
    return np.argmax(net.predict(x, batch_size=batch_size), axis=1)
