"""Row partitioning. Works on anything with ``__len__`` and ``take(indices)``."""
from __future__ import annotations

import numpy as np

from crossaug.tensor import Rng


class PartitionError(ValueError):
    pass


def _rng(seed) -> Rng:
    return seed if isinstance(seed, Rng) else Rng(int(seed))


def _split(ds, first, second):
    if len(first) == 0 or len(second) == 0:
        raise PartitionError(f"partition of {len(ds)} rows leaves an empty side")
    return ds.take(np.sort(first)), ds.take(np.sort(second))


def holdout(ds, fraction: float, seed=0):
    """Seeded ``(train, test)`` split with ``round(fraction * N)`` test rows."""
    if not 0.0 < fraction < 1.0:
        raise PartitionError(f"holdout fraction must lie in (0, 1), got {fraction}")
    perm = _rng(seed).permutation(len(ds))
    n_test = int(round(len(ds) * fraction))
    return _split(ds, perm[n_test:], perm[:n_test])


def kfold_indices(n: int, k: int, seed=0) -> list[np.ndarray]:
    """The ``k`` test folds (sorted index arrays) of a seeded permutation."""
    if k < 2:
        raise PartitionError("kfold needs k >= 2")
    if n < k:
        raise PartitionError(f"cannot make {k} folds from {n} rows")
    perm = _rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def kfold(ds, k: int, fold: int, seed=0):
    """``(train, test)`` for fold ``fold`` of a seeded k-fold split."""
    if not 0 <= fold < k:
        raise PartitionError(f"fold {fold} out of range for k={k}")
    folds = kfold_indices(len(ds), k, seed)
    train = np.concatenate([f for i, f in enumerate(folds) if i != fold])
    return _split(ds, train, folds[fold])


def ab_halves(ds):
    """First ceil(N/2) rows by index vs the rest. No shuffling."""
    n = len(ds)
    half = (n + 1) // 2
    return _split(ds, np.arange(half), np.arange(half, n))


def partition(ds, scheme: str, seed=0, fraction: float = 0.2, k: int = 5, fold: int = 0):
    if scheme == "holdout":
        return holdout(ds, fraction, seed)
    if scheme == "kfold":
        return kfold(ds, k, fold, seed)
    if scheme == "ab_halves":
        return ab_halves(ds)
    raise PartitionError(f"unknown partition scheme {scheme!r}")


def undersample(ds, count: int, seed=0):
    """Seeded sample of ``count`` rows without replacement, original order kept."""
    n = len(ds)
    if count > n:
        raise PartitionError(f"cannot undersample {count} rows from {n}")
    if count < 0:
        raise PartitionError("count must be non-negative")
    if count == n:
        return ds.take(np.arange(n))
    return ds.take(np.sort(_rng(seed).choice(n, count)))
