"""IDX container reader/writer (the MNIST file format).

Layout, big-endian: two zero bytes, a type code byte, a dimension-count
byte, one uint32 per dimension, then the row-major payload.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

TYPE_CODES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


def read_idx(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated magic at byte offset {len(data)}")
    zero, code, ndim = struct.unpack(">HBB", data[:4])
    if zero != 0 or code not in TYPE_CODES or ndim == 0:
        raise IdxFormatError(f"{path}: bad magic 0x{data[:4].hex()} at byte offset 0")
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise IdxFormatError(f"{path}: truncated dimension header at byte offset {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header_end])
    dtype = TYPE_CODES[code]
    need = int(np.prod(dims)) * dtype.itemsize
    have = len(data) - header_end
    if have < need:
        raise IdxFormatError(
            f"{path}: truncated payload at byte offset {len(data)} (expected {header_end + need})"
        )
    return np.frombuffer(data, dtype=dtype, count=int(np.prod(dims)), offset=header_end).reshape(dims)


def write_idx(path, array) -> None:
    a = np.asarray(array)
    if a.dtype == np.uint8:
        code = 0x08
    else:
        code = {v.newbyteorder("="): k for k, v in TYPE_CODES.items()}.get(a.dtype.newbyteorder("="))
        if code is None:
            raise IdxFormatError(f"cannot store dtype {a.dtype} in IDX")
    with open(path, "wb") as f:
        f.write(struct.pack(">HBB", 0, code, a.ndim))
        f.write(struct.pack(f">{a.ndim}I", *a.shape))
        f.write(np.ascontiguousarray(a, dtype=TYPE_CODES[code]).tobytes())


@dataclass
class ImageSet:
    """Images as float64 ``(N, H, W, C)`` in [0, 1] with labels and row ids."""

    name: str
    images: np.ndarray
    labels: np.ndarray
    ids: np.ndarray = None
    origin: str | None = None

    def __post_init__(self):
        if self.origin is None:
            self.origin = self.name
        if self.images.ndim != 4:
            raise ValueError(f"images must be N x H x W x C, got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError("image and label counts differ")
        if self.ids is None:
            self.ids = np.arange(len(self.labels))

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return self.images.shape[1:]

    def take(self, idx) -> "ImageSet":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, images=self.images[idx], labels=self.labels[idx], ids=self.ids[idx])


def load_idx_images(images_path, labels_path, name: str | None = None) -> ImageSet:
    """Load IDX images + labels; bytes in [0, 255] become floats in [0, 1].

    ``images_path`` may be a single file holding ``N x H x W`` (grayscale) or
    ``N x H x W x C`` data, or a list of three ``N x H x W`` files giving the
    R, G and B planes.
    """
    if isinstance(images_path, (list, tuple)):
        planes = [read_idx(p) for p in images_path]
        if len(planes) != 3 or any(p.ndim != 3 or p.shape != planes[0].shape for p in planes):
            raise IdxFormatError("per-channel image files must be three N x H x W arrays of equal shape")
        raw = np.stack(planes, axis=-1)
    else:
        raw = read_idx(images_path)
        if raw.ndim == 3:
            raw = raw[..., None]
        elif raw.ndim != 4:
            raise IdxFormatError(f"{images_path}: image data must have 3 or 4 dimensions, got {raw.ndim}")
    labels = read_idx(labels_path)
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: label data must be 1-dimensional")
    if len(labels) != len(raw):
        raise IdxFormatError(f"{len(raw)} images but {len(labels)} labels")
    images = raw.astype(np.float64) / 255.0
    return ImageSet(name or str(images_path), images, labels.astype(np.int64))


def save_idx_images(images_path, labels_path, images: ImageSet) -> None:
    """Write images (quantised to bytes) and labels as IDX files."""
    data = np.clip(np.rint(images.images * 255.0), 0, 255).astype(np.uint8)
    if data.shape[-1] == 1:
        data = data[..., 0]
    write_idx(images_path, data)
    write_idx(labels_path, images.labels.astype(np.uint8))
