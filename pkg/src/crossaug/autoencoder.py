"""Common-features -> full-features encoder-decoder, deterministic or variational.

The network is trained on the donor dataset to predict every donor feature
from the donor's common features, then frozen and applied to the
recipient's common features. Despite the name it is asymmetric: input and
output widths usually differ.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from crossaug.nn.gradcheck import numeric_gradient, relative_error
from crossaug.nn.layers import Activation, Dense
from crossaug.nn.losses import compute_loss
from crossaug.nn.network import Network, UsageError
from crossaug.nn.serialize import load_weights, save_weights
from crossaug.nn.train import TrainConfig, fit_loop, split_validation
from crossaug.tensor import Rng, ShapeError

log = logging.getLogger(__name__)

VARIANTS = ("ae", "vae")
SAMPLING_MODES = ("sample", "mean_only")


def default_latent(input_width: int) -> int:
    return max(8, input_width // 2)


def default_hidden(latent: int) -> list[int]:
    return [max(64, 2 * latent)]


@dataclass
class LatentSample:
    mu: np.ndarray
    log_var: np.ndarray
    z: np.ndarray
    eps: np.ndarray


def reparameterize(mu, log_var, rng: Rng | None = None, eps=None) -> LatentSample:
    """z = mu + exp(log_var / 2) * eps with eps ~ N(0, I) drawn from ``rng``."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise ShapeError(f"mu {mu.shape} vs log_var {log_var.shape}")
    if eps is None:
        eps = rng.normal(mu.shape)
    eps = np.asarray(eps, dtype=np.float64)
    return LatentSample(mu, log_var, mu + np.exp(0.5 * log_var) * eps, eps)


def kl_loss(mu, log_var) -> float:
    """KL(N(mu, sigma^2) || N(0, I)), summed over latent dims, mean over the batch."""
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    log_var = np.atleast_2d(np.asarray(log_var, dtype=np.float64))
    if mu.shape != log_var.shape:
        raise ShapeError(f"mu {mu.shape} vs log_var {log_var.shape}")
    # expm1(lv) - lv is >= 0 termwise and exact at lv = 0
    per = mu * mu + (np.expm1(log_var) - log_var)
    return 0.5 * float(np.sum(per)) / mu.shape[0]


def kl_grad(mu, log_var):
    n = mu.shape[0]
    return mu / n, 0.5 * np.expm1(log_var) / n


class MappingModel:
    def __init__(self, variant, input_width, output_width, hidden, latent_dim, encoder,
                 heads, decoder, beta=1.0):
        self.variant = variant
        self.input_width = input_width
        self.output_width = output_width
        self.hidden = list(hidden)
        self.latent_dim = latent_dim
        self.encoder = encoder
        self.heads = list(heads)
        self.decoder = decoder
        self.beta = beta
        self.frozen = False
        expected = 1 if variant == "ae" else 2
        if len(self.heads) != expected:
            raise ValueError(f"{variant} needs {expected} latent head(s), got {len(self.heads)}")

    def networks(self) -> dict[str, Network]:
        nets = {"encoder": self.encoder, "mu": self.heads[0]}
        if self.variant == "vae":
            nets["log_var"] = self.heads[1]
        nets["decoder"] = self.decoder
        return nets

    def parameters(self) -> list[np.ndarray]:
        return [p for net in self.networks().values() for p in net.parameters()]

    def layer_widths(self) -> list[int]:
        widths = [self.input_width] + self.hidden + [self.latent_dim]
        widths += list(reversed(self.hidden)) + [self.output_width]
        return widths

    def header(self) -> dict:
        return {
            "model": "mapping",
            "variant": self.variant,
            "input_width": self.input_width,
            "output_width": self.output_width,
            "hidden": self.hidden,
            "latent_dim": self.latent_dim,
            "beta": self.beta,
        }

    def freeze(self) -> "MappingModel":
        nets = {k: v.freeze() for k, v in self.networks().items()}
        return self._with(nets, frozen=True)

    def unfrozen_copy(self) -> "MappingModel":
        nets = {k: v.unfrozen_copy() for k, v in self.networks().items()}
        return self._with(nets, frozen=False)

    def _with(self, nets, frozen):
        heads = [nets["mu"]] + ([nets["log_var"]] if self.variant == "vae" else [])
        m = MappingModel(self.variant, self.input_width, self.output_width, self.hidden,
                         self.latent_dim, nets["encoder"], heads, nets["decoder"], self.beta)
        m.frozen = frozen
        return m

    # forward / backward over the composite graph

    def forward(self, x, rng: Rng | None = None, sampling="sample", eps=None):
        h, enc_cache = self.encoder.forward(x)
        mu, mu_cache = self.heads[0].forward(h)
        caches = {"encoder": enc_cache, "mu": mu_cache}
        latent = None
        if self.variant == "vae":
            log_var, lv_cache = self.heads[1].forward(h)
            caches["log_var"] = lv_cache
            if sampling == "mean_only":
                latent = LatentSample(mu, log_var, mu, np.zeros_like(mu))
            else:
                latent = reparameterize(mu, log_var, rng, eps)
            z = latent.z
        else:
            z = mu
        y, dec_cache = self.decoder.forward(z)
        caches["decoder"] = dec_cache
        return y, caches, latent

    def backward(self, caches, dy, latent: LatentSample | None, beta: float):
        dz, dec_g = self.decoder.backward(caches["decoder"], dy)
        grads = {"decoder": self.decoder.flat_grads(dec_g)}
        if self.variant == "vae":
            sigma = np.exp(0.5 * latent.log_var)
            dmu = dz.copy()
            dlv = dz * 0.5 * sigma * latent.eps
            if beta:
                kmu, klv = kl_grad(latent.mu, latent.log_var)
                dmu += beta * kmu
                dlv += beta * klv
            dh_mu, mu_g = self.heads[0].backward(caches["mu"], dmu)
            dh_lv, lv_g = self.heads[1].backward(caches["log_var"], dlv)
            grads["mu"] = self.heads[0].flat_grads(mu_g)
            grads["log_var"] = self.heads[1].flat_grads(lv_g)
            dh = dh_mu + dh_lv
        else:
            dh, mu_g = self.heads[0].backward(caches["mu"], dz)
            grads["mu"] = self.heads[0].flat_grads(mu_g)
        dx, enc_g = self.encoder.backward(caches["encoder"], dh)
        grads["encoder"] = self.encoder.flat_grads(enc_g)
        flat = [g for name in self.networks() for g in grads[name]]
        return dx, flat

    def loss(self, x, y, loss_kind, beta, rng=None, eps=None):
        """``(total, reconstruction, kl, grads)`` for one batch."""
        out, caches, latent = self.forward(x, rng, eps=eps)
        recon, dout = compute_loss(loss_kind, out, y)
        kl = 0.0
        if self.variant == "vae" and beta:
            kl = kl_loss(latent.mu, latent.log_var)
        _, grads = self.backward(caches, dout, latent, beta if self.variant == "vae" else 0.0)
        return recon + beta * kl, recon, kl, grads


def build_mapping(variant: str, input_width: int, output_width: int, hidden=None,
                  latent_dim: int | None = None, rng: Rng | None = None,
                  beta: float = 1.0) -> MappingModel:
    """Glorot-initialised, unfrozen mapping model.

    Encoder: Dense+ReLU per ``hidden`` width. Latent head(s): linear Dense.
    Decoder: Dense+ReLU per reversed ``hidden`` width, then Dense+sigmoid.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if input_width <= 0 or output_width <= 0:
        raise ValueError("widths must be positive")
    latent_dim = default_latent(input_width) if latent_dim is None else int(latent_dim)
    if latent_dim <= 0:
        raise ValueError("latent_dim must be positive")
    hidden = default_hidden(latent_dim) if hidden is None else [int(h) for h in hidden]
    if latent_dim >= input_width:
        log.warning("latent dim %d >= input width %d: no compression", latent_dim, input_width)
    rng = rng or Rng(0)

    enc_layers = []
    for h in hidden:
        enc_layers += [Dense(h), Activation("relu")]
    encoder = Network(enc_layers, (input_width,), rng.child(0))
    feat = encoder.output_shape
    heads = [Network([Dense(latent_dim)], feat, rng.child(1))]
    if variant == "vae":
        heads.append(Network([Dense(latent_dim)], feat, rng.child(2)))
    dec_layers = []
    for h in reversed(hidden):
        dec_layers += [Dense(h), Activation("relu")]
    dec_layers += [Dense(output_width), Activation("sigmoid")]
    decoder = Network(dec_layers, (latent_dim,), rng.child(3))
    return MappingModel(variant, input_width, output_width, hidden, latent_dim,
                        encoder, heads, decoder, beta)


def _check_unit_range(name, a):
    if a.size and (np.min(a) < 0.0 or np.max(a) > 1.0):
        raise ValueError(f"{name} values must lie in [0, 1]")


def fit_mapping(model: MappingModel, x_common, y_full, cfg: TrainConfig, beta: float | None = None,
                rng: Rng | None = None):
    """Train a copy of ``model``; returns ``(frozen model, History)``.

    Loss is reconstruction (``cfg.loss``) plus ``beta`` times KL; beta is
    ignored for the ae variant.
    """
    x = np.asarray(x_common, dtype=np.float64)
    y = np.asarray(y_full, dtype=np.float64)
    if len(x) != len(y):
        raise ShapeError(f"{len(x)} input rows vs {len(y)} target rows")
    if x.ndim != 2 or x.shape[1] != model.input_width:
        raise ShapeError(f"input width {x.shape[1:]} != model input width {model.input_width}")
    if y.ndim != 2 or y.shape[1] != model.output_width:
        raise ShapeError(f"target width {y.shape[1:]} != model output width {model.output_width}")
    _check_unit_range("input", x)
    _check_unit_range("target", y)
    beta = model.beta if beta is None else float(beta)
    if model.variant == "ae":
        beta = 0.0
    rng = rng or Rng(cfg.seed)

    work = model.unfrozen_copy()
    work.beta = model.beta if model.variant == "ae" else beta
    train_idx, val_idx = split_validation(len(x), cfg.validation_fraction, rng)
    xt, yt = x[train_idx], y[train_idx]

    def step(idx, step_rng):
        total, _, _, grads = work.loss(xt[idx], yt[idx], cfg.loss, beta, step_rng)
        return total, grads

    evaluate = None
    if len(val_idx):
        def evaluate():
            out, _, _ = work.forward(x[val_idx], sampling="mean_only")
            return compute_loss(cfg.loss, out, y[val_idx])[0]

    history = fit_loop(len(xt), work.parameters(), step, cfg, rng, evaluate)
    return work.freeze(), history


def generate_features(model: MappingModel, x_common, rng: Rng | None = None,
                      sampling: str = "sample", batch_size: int = 1024) -> np.ndarray:
    """Synthetic full-width rows for ``x_common``; values lie in [0, 1].

    The ae variant is a pure function. The vae variant draws a fresh latent
    sample per row in ``sample`` mode and uses the mean in ``mean_only``.
    """
    if not model.frozen:
        raise UsageError("generate_features needs a frozen model")
    if sampling not in SAMPLING_MODES:
        raise ValueError(f"sampling must be one of {SAMPLING_MODES}")
    x = np.asarray(x_common, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_width:
        raise ShapeError(f"input width {x.shape[1:]} != model input width {model.input_width}")
    if model.variant == "vae" and sampling == "sample" and rng is None:
        raise ValueError("vae sampling needs an Rng")
    if len(x) == 0:
        return np.zeros((0, model.output_width))
    out = [model.forward(x[i:i + batch_size], rng, sampling)[0]
           for i in range(0, len(x), batch_size)]
    return np.concatenate(out)


def grad_check_mapping(model: MappingModel, x, y, loss_kind="mse", beta=1.0, seed=0,
                       step=1e-5) -> float:
    """Finite-difference check of the full mapping loss with a frozen noise draw."""
    work = model.unfrozen_copy()
    x = np.asarray(x, dtype=np.float64)
    eps = Rng(seed).normal((len(x), work.latent_dim)) if work.variant == "vae" else None
    beta = beta if work.variant == "vae" else 0.0

    def loss_only():
        out, _, latent = work.forward(x, eps=eps)
        recon = compute_loss(loss_kind, out, y)[0]
        if latent is not None and beta:
            recon += beta * kl_loss(latent.mu, latent.log_var)
        return recon

    _, _, _, grads = work.loss(x, y, loss_kind, beta, eps=eps)
    worst = 0.0
    for p, g in zip(work.parameters(), grads):
        worst = max(worst, relative_error(g, numeric_gradient(loss_only, p, step)))
    return worst


def save_mapping(model: MappingModel, path) -> None:
    save_weights(path, model.networks(), model.header())


def load_mapping(path) -> MappingModel:
    nets, header = load_weights(path)
    if header.get("model") != "mapping":
        raise ValueError(f"{path} does not hold a mapping model")
    variant = header["variant"]
    heads = [nets["mu"]] + ([nets["log_var"]] if variant == "vae" else [])
    m = MappingModel(variant, header["input_width"], header["output_width"], header["hidden"],
                     header["latent_dim"], nets["encoder"], heads, nets["decoder"], header["beta"])
    m.frozen = all(n.frozen for n in nets.values())
    return m
