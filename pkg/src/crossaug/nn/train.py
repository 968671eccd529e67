from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from crossaug.nn.losses import LOSS_KINDS, compute_loss
from crossaug.nn.network import Network
from crossaug.nn.optim import Adam
from crossaug.tensor import Rng, ShapeError


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss: str = "mse"
    validation_fraction: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")

    def to_dict(self):
        return asdict(self)


@dataclass
class History:
    loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.loss)


def split_validation(n: int, fraction: float, rng: Rng):
    """Seeded (train_idx, val_idx) split; val is empty when fraction is 0."""
    if fraction <= 0:
        return np.arange(n), np.arange(0)
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * fraction)))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def fit_loop(n_rows, params, step, cfg: TrainConfig, rng: Rng, evaluate=None) -> History:
    """Generic minibatch Adam loop.

    ``step(idx, rng)`` returns ``(loss, grads)`` for the rows ``idx`` with
    ``grads`` ordered like ``params``. Row order is a fresh seeded
    permutation every epoch. ``evaluate()`` (optional) returns a validation
    loss recorded once per epoch.
    """
    if cfg.epochs and cfg.batch_size > n_rows:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds the {n_rows} training rows")
    opt = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    history = History()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_rows)
        total = 0.0
        for b, start in enumerate(range(0, n_rows, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grads = step(idx, rng)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise DivergenceError(epoch, b, loss)
            opt.step(params, grads)
            total += loss * len(idx)
        history.loss.append(total / n_rows)
        if evaluate is not None:
            history.val_loss.append(evaluate())
    return history


def train(net: Network, inputs, targets, cfg: TrainConfig, rng: Rng):
    """Train a copy of ``net``; returns ``(frozen network, History)``."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if len(x) != len(y):
        raise ShapeError(f"{len(x)} input rows vs {len(y)} target rows")
    work = net.unfrozen_copy()
    params = work.parameters()
    train_idx, val_idx = split_validation(len(x), cfg.validation_fraction, rng)
    xt, yt = x[train_idx], y[train_idx]

    def step(idx, step_rng):
        out, cache = work.forward(xt[idx], step_rng, training=True)
        loss, dout = compute_loss(cfg.loss, out, yt[idx])
        _, grads = work.backward(cache, dout)
        return loss, work.flat_grads(grads)

    evaluate = None
    if len(val_idx):
        def evaluate():
            return compute_loss(cfg.loss, work.predict(x[val_idx], training=False), y[val_idx])[0]

    history = fit_loop(len(xt), params, step, cfg, rng, evaluate)
    return work.freeze(), history

