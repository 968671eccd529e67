from __future__ import annotations

import copy

import numpy as np

from crossaug.nn.layers import Layer
from crossaug.tensor import Rng, ShapeError


class UsageError(RuntimeError):
    """An object was used in a state that does not allow the call."""


class Network:
    """A sequential stack of layers with a training/frozen mode flag.

    ``input_shape`` is the per-sample shape (no batch axis). Parameters are
    Glorot-initialised from ``rng`` at construction; pass ``rng=None`` to get
    zero weights.
    """

    def __init__(self, layers: list[Layer], input_shape, rng: Rng | None = None):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.frozen = False
        shape = self.input_shape
        self.shapes = [shape]
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.build(shape, None if rng is None else rng.child(i))
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
            self.shapes.append(shape)

    @property
    def output_shape(self):
        return self.shapes[-1]

    @property
    def training(self) -> bool:
        return not self.frozen

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params.values()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def freeze(self) -> "Network":
        """Return a frozen deep copy whose parameter arrays are read-only."""
        net = copy.deepcopy(self)
        net.frozen = True
        for p in net.parameters():
            p.setflags(write=False)
        return net

    def unfrozen_copy(self) -> "Network":
        net = copy.deepcopy(self)
        net.frozen = False
        for layer in net.layers:
            layer.params = {k: np.array(v) for k, v in layer.params.items()}
        return net

    def forward(self, x, rng: Rng | None = None, training: bool | None = None):
        """Run the stack; returns ``(output, cache)``."""
        x = np.asarray(x, dtype=np.float64)
        if training is None:
            training = self.training
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(
                f"layer 0 ({self.layers[0].kind if self.layers else 'input'}): "
                f"input per-sample shape {tuple(x.shape[1:])} != {self.input_shape}"
            )
        caches = []
        for i, layer in enumerate(self.layers):
            try:
                x, cache = layer.forward(x, training, rng)
            except ShapeError as exc:
                raise ShapeError(f"layer {i}: {exc}") from None
            caches.append(cache)
        return x, _Cache(self, caches)

    def predict(self, x, rng: Rng | None = None, batch_size: int = 512, training=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.concatenate(
            [self.forward(x[i:i + batch_size], rng, training)[0]
             for i in range(0, max(len(x), 1), batch_size)]
        )

    def backward(self, cache: "_Cache", dy):
        """Return ``(dL/dx, [per-layer grad dicts])`` for the matching forward."""
        if not isinstance(cache, _Cache) or cache.network is not self or cache.used:
            raise UsageError("backward needs the unused cache from this network's forward")
        cache.used = True
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            dy, grads[i] = self.layers[i].backward(cache.items[i], dy)
        return dy, grads

    def flat_grads(self, grads) -> list[np.ndarray]:
        """Order per-layer grad dicts like :meth:`parameters`."""
        return [g[name] for layer, g in zip(self.layers, grads) for name in layer.params]

    def describe(self) -> list[dict]:
        return [{"kind": layer.kind, **layer.config()} for layer in self.layers]


class _Cache:
    __slots__ = ("network", "items", "used")

    def __init__(self, network, items):
        self.network = network
        self.items = items
        self.used = False
