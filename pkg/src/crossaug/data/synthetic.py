"""Synthetic stand-ins for data we cannot ship.

``make_synthetic_pair`` builds two feature-disjoint tables sharing a block
of common features, shaped like the lung-cancer GDC/SEER pair (27 encoded
common columns, 41 GDC-only, 51 SEER-only). Every row has a latent risk
factor ``z``; common features and both unique blocks are noisy functions of
it, and the label is ``z > threshold``. SEER-only features depend on ``z``
alone, so they are recoverable from the common features, which is the
structure cross-dataset augmentation relies on.

``render_digits`` draws an MNIST-style digit fixture with Pillow's bundled
font, with random size, offset, rotation, shear and stroke weight.
"""
from __future__ import annotations

from statistics import NormalDist

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from crossaug.data.idx import ImageSet
from crossaug.data.tabular import CATEGORICAL, NUMERICAL, Dataset
from crossaug.tensor import Rng

COMMON_CATEGORIES = {
    "sex": ["Female", "Male"],
    "race": ["American Indian/Alaska Native", "Asian or Pacific Islander", "Black", "White",
             "Unknown"],
    "icd10_site": ["Main bronchus", "Upper lobe", "Middle lobe", "Lower lobe",
                   "Overlapping lesion", "Lung (NOS)"],
    "histology": ["Adenocarcinoma", "Bronchiolo-alveolar carcinoma, non-mucinous",
                  "Invasive mucinous adenocarcinoma", "Adenocarcinoma with mixed subtypes",
                  "Papillary adenocarcinoma (NOS)", "Clear cell adenocarcinoma (NOS)",
                  "Mucinous adenocarcinoma", "Signet ring cell carcinoma",
                  "Acinar cell carcinoma"],
    "laterality": ["Left", "Right", "Other"],
}
COMMON_RANGES = {"year_of_diagnosis": (1957.0, 2017.0), "age_at_diagnosis": (0.0, 88.0)}
COMMON_ORDER = ["sex", "year_of_diagnosis", "age_at_diagnosis", "race", "icd10_site",
                "histology", "laterality"]

GDC_ROWS, SEER_DESK_ROWS = 522, 5000
GDC_UNIQUE, SEER_UNIQUE = 41, 51
POSITIVE_RATE = 0.72


class _Builder:
    """Accumulates named raw columns generated from the latent factor."""

    def __init__(self, z, nuisance, noise, rng: Rng):
        self.z = z
        self.nuisance = nuisance
        self.noise = noise
        self.rng = rng
        self.columns = {}
        self.kinds = {}

    def numeric(self, name, values):
        self.columns[name] = np.asarray(values, dtype=np.float64)
        self.kinds[name] = NUMERICAL

    def categorical(self, name, categories, weights, offsets, nuisance_weights=None):
        scores = np.outer(self.z, weights) + offsets
        if nuisance_weights is not None:
            scores = scores + self.nuisance @ nuisance_weights
        if self.noise:
            scores = scores + self.noise * self.rng.gumbel(scores.shape)
        cats = np.array(categories, dtype=object)
        self.columns[name] = cats[np.argmax(scores, axis=1)]
        self.kinds[name] = CATEGORICAL

    def eps(self):
        return self.rng.normal(len(self.z))


def _block_layout(width: int):
    """Split an encoded width into (3-category features, numeric features)."""
    n_cat = min(3, width // 6)
    return n_cat, width - 3 * n_cat


def _latent_bins(z, k):
    """Equal-probability bin index of each standard-normal value."""
    edges = [NormalDist().inv_cdf(i / k) for i in range(1, k)]
    return np.searchsorted(edges, z)


def _common_features(b: _Builder, coef: Rng, width: int):
    z, v, noise = b.z, b.nuisance, b.noise
    if width == 27:
        # age is strictly monotone in z, so z is recoverable when noise == 0
        b.numeric("age_at_diagnosis", 44.0 + 44.0 * np.tanh(0.6 * z + noise * 0.8 * b.eps()))
        b.numeric("year_of_diagnosis",
                  1987.0 + 30.0 * np.tanh(0.1 * z + 0.5 * v[:, 1] + noise * 0.5 * b.eps()))
        for name in ["sex", "race", "laterality"]:
            cats = COMMON_CATEGORIES[name]
            k = len(cats)
            b.categorical(name, cats, coef.normal(k) * 0.5, coef.normal(k),
                          coef.normal((v.shape[1], k)) * 0.7)
        # histology carries the latent risk bin, but only jointly with the
        # site: each site applies its own cyclic shift to the bin index
        sites = COMMON_CATEGORIES["icd10_site"]
        hists = COMMON_CATEGORIES["histology"]
        site = np.argmax(v @ coef.normal((v.shape[1], len(sites))) + 2.0 * b.rng.gumbel((len(z), len(sites))),
                         axis=1)
        shift = coef.permutation(len(hists))[:len(sites)]
        hist = (_latent_bins(z, len(hists)) + shift[site]) % len(hists)
        if noise:
            flip = b.rng.uniform(len(z)) < min(1.0, 0.2 * noise)
            hist = np.where(flip, b.rng.integers(0, len(hists), len(z)), hist)
        b.columns["icd10_site"] = np.array(sites, dtype=object)[site]
        b.columns["histology"] = np.array(hists, dtype=object)[hist]
        b.kinds["icd10_site"] = b.kinds["histology"] = CATEGORICAL
        b.columns = {name: b.columns[name] for name in COMMON_ORDER}
        return COMMON_ORDER
    if width < 1:
        raise ValueError("common width must be positive")
    n_cat, n_num = _block_layout(width - 1)
    names = ["common_anchor"]
    b.numeric("common_anchor", np.tanh(0.6 * z + noise * 0.5 * b.eps()))
    for j in range(n_num):
        name = f"common_num_{j}"
        b.numeric(name, coef.normal() * z + 0.5 * v[:, j % v.shape[1]] + noise * b.eps())
        names.append(name)
    for j in range(n_cat):
        name = f"common_cat_{j}"
        b.categorical(name, ["p", "q", "r"], coef.normal(3) * 1.5, coef.normal(3),
                      coef.normal((v.shape[1], 3)) * 0.7)
        names.append(name)
    return names


def _unique_features(b: _Builder, coef: Rng, prefix: str, width: int, strength: float,
                     use_nuisance: bool):
    """Numeric and 3-way categorical features of z (plus nuisance if allowed)."""
    z, v, noise = b.z, b.nuisance, b.noise
    n_cat, n_num = _block_layout(width)
    for j in range(n_num):
        centre = coef.uniform(()) * 3.0 - 1.5
        slope = 1.0 + 3.0 * coef.uniform(())
        scale = 10.0 ** coef.integers(0, 4)
        signal = 1.0 / (1.0 + np.exp(-slope * (z - centre)))
        value = strength * signal
        if use_nuisance:
            value = value + (1.0 - strength) * np.tanh(v @ coef.normal(v.shape[1]))
        value = value + noise * 0.15 * b.eps()
        b.numeric(f"{prefix}_num_{j}", scale * value)
    for j in range(n_cat):
        nuis = coef.normal((v.shape[1], 3)) * (1.0 - strength) * 2.0 if use_nuisance else None
        b.categorical(f"{prefix}_cat_{j}", ["low", "mid", "high"],
                      np.array([-2.0, 0.0, 2.0]) * strength, coef.normal(3) * 0.5, nuis)


def make_synthetic_pair(rows_a: int = GDC_ROWS, rows_b: int = SEER_DESK_ROWS,
                        common_width: int = 27, unique_a: int = GDC_UNIQUE,
                        unique_b: int = SEER_UNIQUE, positive_rate: float = POSITIVE_RATE,
                        noise: float = 1.0, seed: int = 0, names=("gdc", "seer")):
    """Return raw datasets ``(A, B)`` sharing ``common_width`` encoded columns.

    Labels are 1 iff the latent factor exceeds the ``1 - positive_rate``
    quantile of a standard normal. ``noise`` scales every noise term; at 0
    the B-only features are exact functions of the common features.
    A-only features are weakly informative and mixed with nuisance factors;
    B-only features depend on the latent factor alone.
    """
    if min(rows_a, rows_b, common_width) <= 0 or min(unique_a, unique_b) < 0:
        raise ValueError("dimensions must be positive")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    threshold = NormalDist().inv_cdf(1.0 - positive_rate)
    root = Rng(seed)
    out = []
    for side, (rows, uwidth, prefix, strength, nuisance) in enumerate(
        [(rows_a, unique_a, names[0], 0.35, True), (rows_b, unique_b, names[1], 1.0, False)]
    ):
        data_rng = root.child(10 + side)
        z = data_rng.normal(rows)
        v = data_rng.normal((rows, 2))
        b = _Builder(z, v, noise, data_rng.child(0))
        # coefficient streams are shared so both sides agree on common features
        _common_features(b, root.child(1), common_width)
        _unique_features(b, root.child(2 + side), prefix, uwidth, strength, nuisance)
        labels = (z > threshold).astype(np.int64)
        ds = Dataset(names[side], b.columns, b.kinds, labels)
        out.append(ds)
    return out[0], out[1]


def common_feature_names(common_width: int = 27) -> list[str]:
    if common_width == 27:
        return list(COMMON_ORDER)
    n_cat, n_num = _block_layout(common_width - 1)
    return (["common_anchor"] + [f"common_num_{j}" for j in range(n_num)]
            + [f"common_cat_{j}" for j in range(n_cat)])


def common_categories(common_width: int = 27) -> dict:
    """Pinned category orders for the 27-column common block."""
    return dict(COMMON_CATEGORIES) if common_width == 27 else {}


def render_digits(n: int, seed: int = 0, size: int = 28, channels: int = 1,
                  name: str = "digits") -> ImageSet:
    """``n`` jittered digit images, labels balanced-ish over 0-9.

    ``channels == 3`` tints foreground and background with random colours,
    giving a CIFAR-shaped input.
    """
    rng = Rng(seed)
    labels = rng.integers(0, 10, n).astype(np.int64)
    params = rng.uniform((n, 8))
    images = np.zeros((n, size, size, channels))
    canvas = size * 2
    for i in range(n):
        p = params[i]
        font = ImageFont.load_default(size=int(canvas * (0.55 + 0.25 * p[0])))
        img = Image.new("L", (canvas, canvas), 0)
        draw = ImageDraw.Draw(img)
        text = str(labels[i])
        x0, y0, x1, y1 = draw.textbbox((0, 0), text, font=font, stroke_width=int(p[1] * 3))
        dx = (canvas - (x1 - x0)) / 2 - x0 + (p[2] - 0.5) * canvas * 0.15
        dy = (canvas - (y1 - y0)) / 2 - y0 + (p[3] - 0.5) * canvas * 0.15
        draw.text((dx, dy), text, fill=255, font=font, stroke_width=int(p[1] * 3), stroke_fill=255)
        shear = (p[4] - 0.5) * 0.5
        img = img.transform(img.size, Image.Transform.AFFINE,
                            (1, shear, -shear * canvas / 2, 0, 1, 0), resample=Image.BILINEAR)
        img = img.rotate((p[5] - 0.5) * 30.0, resample=Image.BILINEAR)
        img = img.resize((size, size), resample=Image.LANCZOS)
        gray = np.asarray(img, dtype=np.float64) / 255.0
        if channels == 1:
            images[i, :, :, 0] = gray
        else:
            fg = 0.5 + 0.5 * rng.uniform(channels)
            bg = 0.4 * rng.uniform(channels)
            images[i] = bg + gray[..., None] * (fg - bg)
    return ImageSet(name, np.clip(images, 0.0, 1.0), labels)
