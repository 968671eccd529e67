"""End-to-end augmentation: align, fit common->donor mapping, generate, append.

The mapping is always fit on donor rows only. Recipient rows pass through
the frozen mapping, and only the donor-unique outputs are appended; the
donor's reconstruction of the common features is dropped because the
recipient already holds real values for them.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from crossaug.autoencoder import MappingModel, build_mapping, fit_mapping, generate_features
from crossaug.data.images import (ImageMaskSpec, compose_augmented_image, flatten_columns,
                                  mask_images)
from crossaug.data.tabular import AlignedPair, Dataset
from crossaug.nn.train import TrainConfig
from crossaug.tensor import Rng

log = logging.getLogger(__name__)


class ConsistencyError(RuntimeError):
    pass


class OverlapError(ValueError):
    pass


@dataclass
class AugmentationPlan:
    donor: str = "B"
    recipient: str = "A"
    variant: str = "ae"
    beta: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)
    sampling: str = "sample"
    seed: int = 0
    hidden: list[int] | None = None
    latent_dim: int | None = None

    def __post_init__(self):
        if self.donor == self.recipient:
            raise ValueError("donor and recipient must differ")


@dataclass
class AugmentedDataset:
    """Recipient matrix with synthetic donor-unique columns appended."""

    recipient: Dataset
    matrix: np.ndarray
    columns: list[str]
    provenance: list[dict]

    @property
    def labels(self):
        return self.recipient.labels

    @property
    def ids(self):
        return self.recipient.ids

    @property
    def synthetic_columns(self) -> list[int]:
        return [i for i, p in enumerate(self.provenance) if p["origin"] == "synthetic"]

    def __len__(self):
        return len(self.matrix)

    def write(self, path, provenance_path=None, label_column="label"):
        """CSV of the encoded matrix plus a provenance sidecar (column, origin, donor feature)."""
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(self.columns + [label_column])
            for row, label in zip(self.matrix, self.labels):
                w.writerow([repr(float(v)) for v in row] + [int(label)])
        provenance_path = provenance_path or f"{path}.provenance.csv"
        with open(provenance_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["column", "origin", "donor_feature"])
            for p in self.provenance:
                w.writerow([p["column"], p["origin"], p.get("donor_feature", "")])


def check_disjoint(donor, recipient):
    """Donor and recipient rows drawn from the same origin must not overlap."""
    origin_d = getattr(donor, "origin", None)
    origin_r = getattr(recipient, "origin", None)
    if origin_d is None or origin_d != origin_r:
        return
    shared = np.intersect1d(donor.ids, recipient.ids)
    if len(shared):
        raise OverlapError(f"{len(shared)} rows appear in both donor and recipient (e.g. id {shared[0]})")


def _build(plan: AugmentationPlan, input_width, output_width, rng: Rng) -> MappingModel:
    return build_mapping(plan.variant, input_width, output_width, plan.hidden, plan.latent_dim,
                         rng=rng, beta=plan.beta)


def fit_donor_mapping(pair: AlignedPair, plan: AugmentationPlan, rng: Rng | None = None):
    """Fit common -> full-donor mapping on ``pair.b``; returns ``(model, history)``."""
    rng = rng or Rng(plan.seed)
    donor = pair.b
    x = donor.encoded[:, pair.common_in_b]
    model = _build(plan, x.shape[1], donor.encoded.shape[1], rng.child(0))
    return fit_mapping(model, x, donor.encoded, plan.train, plan.beta, rng.child(1))


def apply_mapping(pair: AlignedPair, recipient: Dataset, model: MappingModel, plan: AugmentationPlan,
                  rng: Rng | None = None) -> AugmentedDataset:
    """Append synthetic donor-unique columns to an encoded ``recipient`` (shaped like ``pair.a``)."""
    rng = rng or Rng(plan.seed)
    synthetic = generate_features(model, recipient.encoded[:, pair.common_in_a], rng, plan.sampling)
    donor_cols = pair.b.schema.column_names()
    unique = pair.unique_in_b
    if not unique:
        log.warning("donor %s has no unique features; nothing to append", pair.b.name)
    columns = recipient.schema.column_names()
    provenance = [{"column": c, "origin": "real"} for c in columns]
    for j in unique:
        columns.append(f"{donor_cols[j]}*")
        provenance.append({"column": columns[-1], "origin": "synthetic",
                           "donor_feature": donor_cols[j]})
    matrix = np.concatenate([recipient.encoded, synthetic[:, unique]], axis=1)
    expected = recipient.encoded.shape[1] + len(pair.unique_in_b)
    if matrix.shape[1] != expected or len(columns) != expected:
        raise ConsistencyError(f"augmented width {matrix.shape[1]} != expected {expected}")
    return AugmentedDataset(recipient, matrix, columns, provenance)


def run_augmentation(pair: AlignedPair, plan: AugmentationPlan, rng: Rng | None = None):
    """Augment ``pair.a`` with synthetic ``pair.b`` features.

    Returns ``(AugmentedDataset, frozen MappingModel, History)``. Use
    ``pair.swapped()`` to augment the other direction.
    """
    if plan.recipient not in (pair.a.name, "A") or plan.donor not in (pair.b.name, "B"):
        raise ValueError(
            f"plan {plan.recipient}<-{plan.donor} does not match pair {pair.a.name}<-{pair.b.name}"
        )
    check_disjoint(pair.b, pair.a)
    rng = rng or Rng(plan.seed)
    model, history = fit_donor_mapping(pair, plan, rng.child(0))
    return apply_mapping(pair, pair.a, model, plan, rng.child(1)), model, history


# image variant: columns of an image play the role of features


def image_mapping_data(donor_images, donor_spec: ImageMaskSpec):
    """``(common band, donor kept band)`` flattened, for fitting an image mapping."""
    images = np.asarray(donor_images, dtype=np.float64)
    _, common = mask_images(images, donor_spec)
    return common, flatten_columns(images, donor_spec.kept)


def fit_image_mapping(donor_images, donor_spec: ImageMaskSpec, plan: AugmentationPlan,
                      rng: Rng | None = None):
    rng = rng or Rng(plan.seed)
    x, y = image_mapping_data(donor_images, donor_spec)
    model = _build(plan, x.shape[1], y.shape[1], rng.child(0))
    return fit_mapping(model, x, y, plan.train, plan.beta, rng.child(1))


def augment_images(masked, spec: ImageMaskSpec, model: MappingModel, rng: Rng | None = None,
                   sampling: str = "sample") -> np.ndarray:
    """Fill the recipient's zeroed columns with the donor mapping's output."""
    masked = np.asarray(masked, dtype=np.float64)
    common = flatten_columns(masked, spec.common)
    if common.shape[1] != model.input_width:
        raise ValueError(f"model input width {model.input_width} != common band width {common.shape[1]}")
    donor_width = len(spec.opposite().kept) * spec.column_size
    if model.output_width != donor_width:
        raise ValueError(f"model output width {model.output_width} != donor band width {donor_width}")
    synthetic = generate_features(model, common, rng, sampling)
    return compose_augmented_image(masked, synthetic, spec)


def plan_from_dict(d: dict) -> AugmentationPlan:
    d = dict(d)
    train = TrainConfig(**d.pop("train", {}))
    return AugmentationPlan(train=train, **d)


def plan_to_json(plan: AugmentationPlan) -> str:
    from dataclasses import asdict
    return json.dumps(asdict(plan), sort_keys=True)
