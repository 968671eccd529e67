"""Experiment grids: baseline vs AE/VAE augmentation across a sweep.

Image grids sweep the common-column count ``n``; tabular grids sweep the
number of rows kept from the larger dataset (B). Each grid cell runs:

1. hold out a test set from the (image) data or the recipient table;
2. image data only: split the remaining rows by index into halves A and B;
3. per fold of a k-fold split, fit the mapping on the donor's training
   folds, augment the recipient's training folds and the test set with the
   same frozen mapping, train a classifier, and score F1 on the test set.

Data splits derive from the experiment seed alone, so every cell sees the
same test rows and folds; model initialisation and minibatch order derive
from a per-cell child generator.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from crossaug.augment import (AugmentationPlan, apply_mapping, augment_images, check_disjoint,
                              fit_donor_mapping, fit_image_mapping)
from crossaug.data.idx import ImageSet, load_idx_images
from crossaug.data.images import ImageMaskSpec, mask_images
from crossaug.data.partition import ab_halves, holdout, kfold, undersample
from crossaug.data.synthetic import (common_feature_names, make_synthetic_pair, render_digits,
                                     common_categories)
from crossaug.data.tabular import drop_missing, fit_union_schema, load_tabular
from crossaug.eval.classifiers import predict_labels, train_classifier
from crossaug.eval.metrics import f1
from crossaug.nn.train import TrainConfig
from crossaug.tensor import Rng

log = logging.getLogger(__name__)

IMAGE_SOURCES = ("synthetic-digits", "image-idx")
TABULAR_SOURCES = ("synthetic-pair", "tabular-csv")
VARIANTS = ("baseline", "ae", "vae")


class ExperimentError(RuntimeError):
    pass


class LeakError(ExperimentError):
    pass


@dataclass
class ExperimentSpec:
    source: str
    data: dict = field(default_factory=dict)
    grid: list = field(default_factory=list)
    variants: list = field(default_factory=lambda: list(VARIANTS))
    directions: list = field(default_factory=lambda: ["A"])
    folds: int = 5
    seed: int = 0
    test_fraction: float = 0.2
    test_rows: int | None = None
    averaging: str | None = None
    classifier: dict = field(default_factory=dict)
    mapping: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in IMAGE_SOURCES + TABULAR_SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if not self.grid:
            raise ValueError("grid must list at least one value")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise ValueError(f"variants must be drawn from {VARIANTS}, got {self.variants}")
        bad = [d for d in self.directions if d not in ("A", "B")]
        if bad or not self.directions:
            raise ValueError(f"directions must be A and/or B, got {self.directions}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.is_image:
            for n in self.grid:
                if n % 2 or n < 2:
                    raise ValueError(f"common column counts must be even and >= 2, got {n}")

    @property
    def is_image(self) -> bool:
        return self.source in IMAGE_SOURCES

    @property
    def axis(self) -> str:
        return "n" if self.is_image else "count"

    @property
    def f1_averaging(self) -> str:
        return self.averaging or ("macro" if self.is_image else "binary_positive")

    def cells(self):
        return [(d, v) for d in self.directions for v in self.grid]


@dataclass
class ExperimentResult:
    cell: str
    axis: str
    value: int
    direction: str
    fold_f1: dict = field(default_factory=dict)
    seconds: float = 0.0
    seed: int = 0
    error: str | None = None

    @property
    def mean_f1(self) -> dict:
        return {k: float(np.mean(v)) for k, v in self.fold_f1.items() if v}

    def to_dict(self):
        d = asdict(self)
        d["mean_f1"] = self.mean_f1
        return d


def classifier_config(spec: ExperimentSpec):
    c = dict(spec.classifier)
    kind = c.pop("kind", None) or ("image_cnn" if spec.is_image else "tabular_mlp")
    defaults = {"epochs": 10, "batch_size": 64} if spec.is_image else {"epochs": 60, "batch_size": 32}
    train = TrainConfig(**{**defaults, **c.pop("train", {}), "loss": "softmax_ce"})
    return kind, train, c.pop("arch", {})


def mapping_plan(spec: ExperimentSpec, variant: str, seed: int) -> AugmentationPlan:
    m = dict(spec.mapping)
    train = TrainConfig(**{"epochs": 50, "batch_size": 32, **m.pop("train", {})})
    return AugmentationPlan(variant=variant, train=train, seed=seed,
                            beta=m.pop("beta", 1.0), sampling=m.pop("sampling", "sample"),
                            hidden=m.pop("hidden", None), latent_dim=m.pop("latent_dim", None))


# data sources

def load_source(spec: ExperimentSpec):
    return _load_source(spec.source, json.dumps(spec.data, sort_keys=True))


@lru_cache(maxsize=4)
def _load_source(source, data_json):
    data = json.loads(data_json)
    if source == "synthetic-digits":
        return render_digits(int(data.get("rows", 14000)), seed=int(data.get("seed", 0)),
                             size=int(data.get("size", 28)), channels=int(data.get("channels", 1)),
                             name="digits")
    if source == "image-idx":
        images = data["images"]
        imgs = load_idx_images(images, data["labels"],
                               name=data.get("name", "images"))
        if data.get("limit"):
            imgs = imgs.take(np.arange(min(int(data["limit"]), len(imgs))))
        return imgs
    if source == "synthetic-pair":
        width = int(data.get("common_width", 27))
        a, b = make_synthetic_pair(
            rows_a=int(data.get("rows_a", 522)), rows_b=int(data.get("rows_b", 5000)),
            common_width=width, unique_a=int(data.get("unique_a", 41)),
            unique_b=int(data.get("unique_b", 51)), noise=float(data.get("noise", 1.0)),
            seed=int(data.get("seed", 0)),
        )
        return {"a": a, "b": b, "common": common_feature_names(width),
                "categories": common_categories(width), "ranges": {}}
    if source == "tabular-csv":
        label = data.get("label_column", "label")
        names = data.get("names", ("A", "B"))
        a = drop_missing(load_tabular(data["a"], label, name=names[0]))
        b = drop_missing(load_tabular(data["b"], label, name=names[1]))
        common = list(data.get("common") or [c for c in a.columns if c in b.columns])
        cats = data.get("categories", {})
        ranges = {k: tuple(v) for k, v in data.get("ranges", {}).items()}
        return {"a": a, "b": b, "common": common, "categories": cats, "ranges": ranges}
    raise ValueError(f"unknown source {source!r}")


# cells

def _split_rng(spec: ExperimentSpec) -> Rng:
    return Rng(spec.seed).child(0)


def _test_fraction(spec: ExperimentSpec, n: int) -> float:
    return spec.test_rows / n if spec.test_rows else spec.test_fraction


def _assert_no_leak(test, *train_sets):
    for t in train_sets:
        if getattr(t, "origin", None) == getattr(test, "origin", None):
            shared = np.intersect1d(t.ids, test.ids)
            if len(shared):
                raise LeakError(f"test row id {shared[0]} also appears in a training set")


def _score(spec, kind, cfg, arch, x_tr, y_tr, x_te, y_te, rng, n_classes):
    net = train_classifier(kind, x_tr, y_tr, cfg, rng, n_classes=n_classes, **arch)
    return f1(predict_labels(net, x_te), y_te, spec.f1_averaging,
              n_classes if spec.f1_averaging == "macro" else None)


def run_image_cell(spec: ExperimentSpec, data: ImageSet, direction: str, n: int, rng: Rng) -> dict:
    split = _split_rng(spec)
    train, test = holdout(data, _test_fraction(spec, len(data)), split.child(0))
    half_a, half_b = ab_halves(train)
    recipient, donor = (half_a, half_b) if direction == "A" else (half_b, half_a)
    spec_r = ImageMaskSpec.for_images(data.images, n, direction)
    spec_d = spec_r.opposite()
    check_disjoint(donor, recipient)
    kind, cfg, arch = classifier_config(spec)
    n_classes = int(data.labels.max()) + 1
    test_masked, _ = mask_images(test.images, spec_r)
    scores = {v: [] for v in spec.variants}
    for fold in range(spec.folds):
        rec_tr, _ = kfold(recipient, spec.folds, fold, split.child(1))
        don_tr, _ = kfold(donor, spec.folds, fold, split.child(2))
        _assert_no_leak(test, rec_tr, don_tr)
        rec_masked, _ = mask_images(rec_tr.images, spec_r)
        fold_rng = rng.child(fold)
        for vi, variant in enumerate(spec.variants):
            vr = fold_rng.child(vi)
            if variant == "baseline":
                x_tr, x_te = rec_masked, test_masked
            else:
                plan = mapping_plan(spec, variant, spec.seed)
                model, _ = fit_image_mapping(don_tr.images, spec_d, plan, vr.child(0))
                x_tr = augment_images(rec_masked, spec_r, model, vr.child(1), plan.sampling)
                x_te = augment_images(test_masked, spec_r, model, vr.child(2), plan.sampling)
            scores[variant].append(
                _score(spec, kind, cfg, arch, x_tr, rec_tr.labels, x_te, test.labels, vr.child(3), n_classes))
            log.info("event=fold_done cell=%s-n%d fold=%d variant=%s f1=%.6f",
                     direction, n, fold, variant, scores[variant][-1])
    return scores


def run_tabular_cell(spec: ExperimentSpec, data: dict, direction: str, count: int, rng: Rng) -> dict:
    split = _split_rng(spec)
    b_full = data["b"]
    b = b_full if not count or count >= len(b_full) else undersample(b_full, int(count), split.child(3))
    _, _, pair = fit_union_schema(data["a"], b, data["common"], data["categories"], data["ranges"])
    if direction == "B":
        pair = pair.swapped()
    rec_train, test = holdout(pair.a, _test_fraction(spec, len(pair.a)), split.child(0))
    kind, cfg, arch = classifier_config(spec)
    scores = {v: [] for v in spec.variants}
    for fold in range(spec.folds):
        rec_tr, _ = kfold(rec_train, spec.folds, fold, split.child(1))
        don_tr, _ = kfold(pair.b, spec.folds, fold, split.child(2))
        _assert_no_leak(test, rec_tr, don_tr)
        fold_rng = rng.child(fold)
        for vi, variant in enumerate(spec.variants):
            vr = fold_rng.child(vi)
            if variant == "baseline":
                x_tr, x_te = rec_tr.encoded, test.encoded
            else:
                plan = mapping_plan(spec, variant, spec.seed)
                fold_pair = replace(pair, b=don_tr)
                model, _ = fit_donor_mapping(fold_pair, plan, vr.child(0))
                x_tr = apply_mapping(fold_pair, rec_tr, model, plan, vr.child(1)).matrix
                x_te = apply_mapping(fold_pair, test, model, plan, vr.child(2)).matrix
            scores[variant].append(
                _score(spec, kind, cfg, arch, x_tr, rec_tr.labels, x_te, test.labels, vr.child(3), 2))
            log.info("event=fold_done cell=%s-count%s fold=%d variant=%s f1=%.6f",
                     direction, count, fold, variant, scores[variant][-1])
    return scores


def run_cell(spec: ExperimentSpec, index: int) -> ExperimentResult:
    direction, value = spec.cells()[index]
    cell_id = f"{direction}-{spec.axis}{value}"
    result = ExperimentResult(cell_id, spec.axis, value, direction, seed=spec.seed)
    start = time.perf_counter()
    rng = Rng(spec.seed).child(1).child(index)
    try:
        data = load_source(spec)
        if spec.is_image:
            result.fold_f1 = run_image_cell(spec, data, direction, value, rng)
        else:
            result.fold_f1 = run_tabular_cell(spec, data, direction, value, rng)
    except Exception as exc:  # a failed cell must not sink the grid
        log.error("event=cell_failed cell=%s error=%s", cell_id, exc)
        result.error = f"{type(exc).__name__}: {exc}"
    result.seconds = time.perf_counter() - start
    log.info("event=cell_done cell=%s seconds=%.1f means=%s", cell_id, result.seconds,
             {k: round(v, 6) for k, v in result.mean_f1.items()})
    return result


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[ExperimentResult]:
    """Run every grid cell. ``jobs > 1`` runs cells in worker processes."""
    indices = range(len(spec.cells()))
    if jobs <= 1:
        return [run_cell(spec, i) for i in indices]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_cell, [spec] * len(indices), indices))
