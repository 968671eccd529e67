"""Dense float64 arrays and the seeded random generator everything else uses.

Tensors are plain ``numpy.ndarray`` values, dtype float64, C (row-major)
order. Broadcasting is deliberately limited to scalar-vs-tensor in the
helpers below.

Randomness: :class:`Rng` wraps numpy's PCG64 bit generator. Normal draws use
numpy's ziggurat sampler (``Generator.standard_normal``). Child generators are
derived with ``numpy.random.SeedSequence`` spawn keys, so ``rng.child(3)``
always yields the same stream for the same seed regardless of how much the
parent has been consumed.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """Input lies outside an operation's domain."""


def as_tensor(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def matmul(a, b) -> np.ndarray:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def map_elementwise(a, f) -> np.ndarray:
    a = as_tensor(a)
    try:
        out = np.asarray(f(a), dtype=np.float64)
    except TypeError:
        out = None
    if out is None or out.shape != a.shape:
        # f only understands Python scalars
        out = np.vectorize(f, otypes=[np.float64])(a)
    return out


def zip_elementwise(a, b, f) -> np.ndarray:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape and a.ndim and b.ndim:
        raise ShapeError(f"zip: shapes {a.shape} and {b.shape} differ")
    a, b = np.broadcast_arrays(a, b)
    try:
        out = np.asarray(f(a, b), dtype=np.float64)
    except TypeError:
        out = None
    if out is None or out.shape != a.shape:
        out = np.vectorize(f, otypes=[np.float64])(a, b)
    return out


_REDUCERS = {"sum": np.sum, "mean": np.mean, "max": np.max, "argmax": np.argmax}


def reduce(a, axis: int, kind: str) -> np.ndarray:
    """Reduce along ``axis``. ``argmax`` breaks ties toward the lowest index."""
    a = as_tensor(a)
    if kind not in _REDUCERS:
        raise ValueError(f"unknown reduction {kind!r}")
    if not 0 <= axis < a.ndim:
        raise ShapeError(f"axis {axis} out of range for rank {a.ndim}")
    if a.shape[axis] == 0:
        raise DomainError(f"cannot {kind} over empty axis {axis}")
    return _REDUCERS[kind](a, axis=axis)


class Rng:
    """Deterministic PCG64 generator with reproducible child derivation."""

    algorithm = "PCG64"

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.key = tuple(_key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self.key})"

    def child(self, index: int) -> "Rng":
        return Rng(self.seed, self.key + (int(index),))

    def uniform(self, shape) -> np.ndarray:
        return self._gen.random(shape)

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def permutation(self, n: int) -> np.ndarray:
        if n < 0:
            raise ShapeError("permutation size must be non-negative")
        return self._gen.permutation(n)

    def choice(self, n: int, size: int) -> np.ndarray:
        """``size`` distinct indices from ``range(n)``, in draw order."""
        return self._gen.choice(n, size=size, replace=False)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def gumbel(self, shape) -> np.ndarray:
        return self._gen.gumbel(size=shape)


def draw(rng: Rng, kind: str, shape):
    if kind == "uniform01":
        return rng.uniform(shape)
    if kind == "standard_normal":
        return rng.normal(shape)
    if kind == "permutation":
        return rng.permutation(int(shape))
    raise ValueError(f"unknown draw kind {kind!r}")
