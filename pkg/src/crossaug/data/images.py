"""Splitting images by column into two simulated datasets.

Side A keeps the left half of the columns plus ``n/2`` columns past the
middle; side B keeps the right half plus ``n/2`` columns before it. The
``n`` middle columns are the common band. Everything outside a side's kept
columns is zeroed so masked images keep their original size.

Flattening order for column blocks: column by column, and within a column
row-major over (row, channel). So column ``j`` of an ``H x W x C`` image
occupies ``H * C`` consecutive values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIDES = ("A", "B")


class MaskSpecError(ValueError):
    pass


class CompositionError(ValueError):
    pass


@dataclass(frozen=True)
class ImageMaskSpec:
    width: int
    height: int
    channels: int
    n: int
    side: str = "A"

    def __post_init__(self):
        if self.side not in SIDES:
            raise MaskSpecError(f"side must be A or B, got {self.side!r}")
        if self.width % 2:
            raise MaskSpecError(f"image width must be even, got {self.width}")
        if self.n % 2:
            raise MaskSpecError(f"common column count must be even, got {self.n}")
        if not 2 <= self.n <= self.width - 2:
            raise MaskSpecError(f"common column count {self.n} outside [2, {self.width - 2}]")
        if self.height <= 0 or self.channels <= 0:
            raise MaskSpecError("height and channels must be positive")

    @classmethod
    def for_images(cls, images, n, side="A"):
        _, h, w, c = np.shape(images)
        return cls(w, h, c, n, side)

    @property
    def common(self) -> np.ndarray:
        mid = self.width // 2
        return np.arange(mid - self.n // 2, mid + self.n // 2)

    @property
    def kept(self) -> np.ndarray:
        mid = self.width // 2
        if self.side == "A":
            return np.arange(0, mid + self.n // 2)
        return np.arange(mid - self.n // 2, self.width)

    @property
    def zeroed(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.width), self.kept)

    @property
    def unique(self) -> np.ndarray:
        return np.setdiff1d(self.kept, self.common)

    def opposite(self) -> "ImageMaskSpec":
        return ImageMaskSpec(self.width, self.height, self.channels, self.n,
                             "B" if self.side == "A" else "A")

    @property
    def column_size(self) -> int:
        return self.height * self.channels

    def _check(self, images):
        if images.ndim != 4 or images.shape[1:] != (self.height, self.width, self.channels):
            raise MaskSpecError(
                f"images of shape {images.shape[1:]} do not match spec "
                f"{(self.height, self.width, self.channels)}"
            )


def flatten_columns(images, columns) -> np.ndarray:
    images = np.asarray(images)
    n = images.shape[0]
    return images[:, :, columns, :].transpose(0, 2, 1, 3).reshape(n, -1)


def unflatten_columns(matrix, height: int, channels: int) -> np.ndarray:
    """Inverse of :func:`flatten_columns`: ``(N, k*H*C)`` -> ``(N, H, k, C)``."""
    m = np.asarray(matrix)
    n = m.shape[0]
    k = m.shape[1] // (height * channels)
    if k * height * channels != m.shape[1]:
        raise CompositionError(f"width {m.shape[1]} is not a whole number of {height}x{channels} columns")
    return m.reshape(n, k, height, channels).transpose(0, 2, 1, 3)


def mask_images(images, spec: ImageMaskSpec):
    """Return ``(masked images, flattened common band)``."""
    images = np.asarray(images, dtype=np.float64)
    spec._check(images)
    masked = np.zeros_like(images)
    kept = spec.kept
    masked[:, :, kept, :] = images[:, :, kept, :]
    return masked, flatten_columns(images, spec.common)


def compose_augmented_image(masked, synthetic, spec: ImageMaskSpec) -> np.ndarray:
    """Fill the recipient's zeroed columns from synthetic donor-side output.

    ``synthetic`` covers the donor's kept band (``spec.opposite().kept``),
    either flattened per :func:`flatten_columns` or as ``(N, H, k, C)``.
    Recipient-kept columns come from ``masked`` untouched.
    """
    masked = np.asarray(masked, dtype=np.float64)
    spec._check(masked)
    donor_cols = spec.opposite().kept
    synthetic = np.asarray(synthetic, dtype=np.float64)
    if synthetic.ndim == 2:
        if synthetic.shape[1] != len(donor_cols) * spec.column_size:
            raise CompositionError(
                f"synthetic width {synthetic.shape[1]} != donor band "
                f"{len(donor_cols)} columns x {spec.column_size}"
            )
        synthetic = unflatten_columns(synthetic, spec.height, spec.channels)
    expected = (len(masked), spec.height, len(donor_cols), spec.channels)
    if synthetic.shape != expected:
        raise CompositionError(f"synthetic block {synthetic.shape} != expected {expected}")
    if synthetic.size and (synthetic.min() < 0.0 or synthetic.max() > 1.0):
        raise CompositionError("synthetic values must lie in [0, 1]")
    out = masked.copy()
    position = {c: i for i, c in enumerate(donor_cols)}
    zeroed = spec.zeroed
    out[:, :, zeroed, :] = synthetic[:, :, [position[c] for c in zeroed], :]
    return out
