"""Loss functions returning ``(loss, dL/dprediction)``.

All losses average over the batch (first) axis. ``mse`` and ``bce`` also
average over features so their scale does not depend on output width;
``softmax_ce`` sums over classes, as usual for cross-entropy.
"""
from __future__ import annotations

import numpy as np

from crossaug.tensor import DomainError, ShapeError

LOSS_KINDS = ("mse", "bce", "softmax_ce")

_TINY = np.finfo(np.float64).tiny


def compute_loss(kind: str, prediction, target):
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"{kind}: prediction {p.shape} vs target {t.shape}")
    if p.size == 0:
        raise DomainError(f"{kind}: empty batch")
    n = p.shape[0]
    if kind == "mse":
        diff = p - t
        return float(np.mean(diff * diff)), 2.0 * diff / diff.size
    if kind == "bce":
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise DomainError("bce: predictions must lie strictly inside (0, 1); apply a sigmoid first")
        loss = -np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p))
        grad = (p - t) / (p * (1.0 - p)) / p.size
        return float(loss), grad
    if kind == "softmax_ce":
        if np.any(p < 0.0):
            raise DomainError("softmax_ce: predictions must be probabilities")
        safe = np.maximum(p, _TINY)
        loss = -np.sum(t * np.log(safe)) / n
        grad = np.zeros_like(p)
        np.divide(-t, safe, out=grad, where=t != 0)
        return float(max(loss, 0.0)), grad / n
    raise ValueError(f"unknown loss kind {kind!r}")
