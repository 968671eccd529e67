"""Sequential layer kinds with hand-written forward and backward passes.

Every layer works on a batch: dense-style inputs are ``(N, features)``,
image-style inputs are ``(N, H, W, C)``. ``forward`` returns the output and
an opaque cache; ``backward`` consumes that cache and returns the input
gradient plus a dict of parameter gradients keyed like ``params``.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from crossaug.tensor import Rng, ShapeError


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.input_shape: tuple[int, ...] | None = None

    def build(self, input_shape: tuple[int, ...], rng: Rng | None) -> tuple[int, ...]:
        """Fix the per-sample input shape, create parameters, return output shape."""
        self.input_shape = tuple(input_shape)
        return self.output_shape(self.input_shape)

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def config(self) -> dict:
        return {}

    def forward(self, x, training: bool, rng: Rng | None):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError

    def _check_input(self, x):
        if self.input_shape is not None and tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(
                f"{self.kind}: expected per-sample shape {self.input_shape}, got {tuple(x.shape[1:])}"
            )


def glorot_uniform(rng: Rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return (rng.uniform(shape) * 2.0 - 1.0) * limit


class Dense(Layer):
    kind = "dense"

    def __init__(self, units: int):
        super().__init__()
        if units <= 0:
            raise ValueError("dense units must be positive")
        self.units = int(units)

    def output_shape(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeError(f"dense expects flat input, got per-sample shape {input_shape}")
        return (self.units,)

    def build(self, input_shape, rng):
        out = super().build(input_shape, rng)
        fan_in = input_shape[0]
        if rng is None:
            w = np.zeros((fan_in, self.units))
        else:
            w = glorot_uniform(rng, (fan_in, self.units), fan_in, self.units)
        self.params = {"W": w, "b": np.zeros(self.units)}
        return out

    def config(self):
        return {"units": self.units}

    def forward(self, x, training, rng):
        self._check_input(x)
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, cache, dy):
        x = cache
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T, grads


class Conv2D(Layer):
    """Stride-1 convolution with zero ("same") padding; odd square kernels only."""

    kind = "conv2d"

    def __init__(self, filters: int, kernel_size: int = 3):
        super().__init__()
        if filters <= 0:
            raise ValueError("conv2d filters must be positive")
        if kernel_size <= 0 or kernel_size % 2 == 0:
            raise ValueError("conv2d kernel size must be a positive odd integer")
        self.filters = int(filters)
        self.kernel_size = int(kernel_size)

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(f"conv2d expects H x W x C input, got {input_shape}")
        h, w, _ = input_shape
        return (h, w, self.filters)

    def build(self, input_shape, rng):
        out = super().build(input_shape, rng)
        k, c, f = self.kernel_size, input_shape[2], self.filters
        shape = (k, k, c, f)
        if rng is None:
            w = np.zeros(shape)
        else:
            w = glorot_uniform(rng, shape, k * k * c, k * k * f)
        self.params = {"W": w, "b": np.zeros(f)}
        return out

    def config(self):
        return {"filters": self.filters, "kernel_size": self.kernel_size}

    def _columns(self, x):
        n, h, w, c = x.shape
        k = self.kernel_size
        p = k // 2
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        win = sliding_window_view(xp, (k, k), axis=(1, 2))  # N,H,W,C,k,k
        return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, k * k * c)

    def forward(self, x, training, rng):
        self._check_input(x)
        n, h, w, _ = x.shape
        cols = self._columns(x)
        wmat = self.params["W"].reshape(-1, self.filters)
        y = cols @ wmat + self.params["b"]
        return y.reshape(n, h, w, self.filters), (cols, x.shape)

    def backward(self, cache, dy):
        cols, (n, h, w, c) = cache
        k = self.kernel_size
        p = k // 2
        dy2 = dy.reshape(-1, self.filters)
        grads = {
            "W": (cols.T @ dy2).reshape(self.params["W"].shape),
            "b": dy2.sum(axis=0),
        }
        dcols = (dy2 @ self.params["W"].reshape(-1, self.filters).T).reshape(n, h, w, k, k, c)
        dxp = np.zeros((n, h + 2 * p, w + 2 * p, c))
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + h, j:j + w, :] += dcols[:, :, :, i, j, :]
        return dxp[:, p:p + h, p:p + w, :], grads


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2. Odd trailing rows/columns are dropped."""

    kind = "maxpool2x2"

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(f"maxpool2x2 expects H x W x C input, got {input_shape}")
        h, w, c = input_shape
        if h < 2 or w < 2:
            raise ShapeError(f"maxpool2x2 needs at least 2x2 input, got {input_shape}")
        return (h // 2, w // 2, c)

    def forward(self, x, training, rng):
        self._check_input(x)
        n, h, w, c = x.shape
        ho, wo = h // 2, w // 2
        r = x[:, :2 * ho, :2 * wo, :].reshape(n, ho, 2, wo, 2, c)
        r = r.transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, 4)
        idx = np.argmax(r, axis=-1)[..., None]
        y = np.take_along_axis(r, idx, axis=-1)[..., 0]
        return y, (idx, x.shape)

    def backward(self, cache, dy):
        idx, (n, h, w, c) = cache
        ho, wo = h // 2, w // 2
        dr = np.zeros((n, ho, wo, c, 4))
        np.put_along_axis(dr, idx, dy[..., None], axis=-1)
        dr = dr.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        dx = np.zeros((n, h, w, c))
        dx[:, :2 * ho, :2 * wo, :] = dr.reshape(n, 2 * ho, 2 * wo, c)
        return dx, {}


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-rate) while training."""

    kind = "dropout"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)

    def config(self):
        return {"rate": self.rate}

    def forward(self, x, training, rng):
        self._check_input(x)
        if not training or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("training-mode dropout needs an Rng")
        mask = (rng.uniform(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, cache, dy):
        if cache is None:
            return dy, {}
        return dy * cache, {}


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class Activation(Layer):
    kind = "activation"
    functions = ("relu", "sigmoid", "softmax")

    def __init__(self, function: str):
        super().__init__()
        if function not in self.functions:
            raise ValueError(f"unknown activation {function!r}")
        self.function = function

    def output_shape(self, input_shape):
        if self.function == "softmax" and len(input_shape) != 1:
            raise ShapeError("softmax expects flat input")
        return tuple(input_shape)

    def config(self):
        return {"function": self.function}

    def forward(self, x, training, rng):
        self._check_input(x)
        if self.function == "relu":
            return np.maximum(x, 0.0), x > 0
        if self.function == "sigmoid":
            y = _sigmoid(x)
            return y, y
        y = softmax(x)
        return y, y

    def backward(self, cache, dy):
        if self.function == "relu":
            return dy * cache, {}
        y = cache
        if self.function == "sigmoid":
            return dy * y * (1.0 - y), {}
        return y * (dy - np.sum(dy * y, axis=-1, keepdims=True)), {}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, training, rng):
        self._check_input(x)
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), {}


LAYER_KINDS = {
    cls.kind: cls for cls in (Dense, Conv2D, MaxPool2x2, Dropout, Activation, Flatten)
}


def layer_from_config(kind: str, config: dict) -> Layer:
    try:
        cls = LAYER_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown layer kind {kind!r}") from None
    return cls(**config)
