from __future__ import annotations

import numpy as np

AVERAGING = ("macro", "binary_positive")


def f1(predicted, true, averaging: str = "macro", n_classes: int | None = None) -> float:
    """F1 score.

    ``macro`` averages per-class F1 over classes ``0 .. n_classes-1``
    (default: one past the largest label seen); a class absent from both
    vectors scores 0 and still counts. ``binary_positive`` is the F1 of
    class 1 in a two-class problem.
    """
    p = np.asarray(predicted, dtype=np.int64)
    t = np.asarray(true, dtype=np.int64)
    if p.shape != t.shape:
        raise ValueError(f"{len(p)} predictions vs {len(t)} labels")
    if p.size == 0:
        raise ValueError("f1 of an empty labelling")
    if averaging == "binary_positive":
        if np.any((p < 0) | (p > 1)) or np.any((t < 0) | (t > 1)):
            raise ValueError("binary_positive F1 needs labels in {0, 1}")
        return _class_f1(p, t, 1)
    if averaging != "macro":
        raise ValueError(f"averaging must be one of {AVERAGING}")
    if n_classes is None:
        n_classes = int(max(p.max(), t.max())) + 1
    return float(np.mean([_class_f1(p, t, c) for c in range(n_classes)]))


def _class_f1(p, t, c) -> float:
    tp = int(np.sum((p == c) & (t == c)))
    fp = int(np.sum((p == c) & (t != c)))
    fn = int(np.sum((p != c) & (t == c)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def accuracy(predicted, true) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(true)))
