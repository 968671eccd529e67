"""Binary dump of an encoded matrix, to skip re-encoding.

Layout: the 8 ASCII bytes ``CXAUGENC``, a little-endian uint32 header length
``L``, ``L`` bytes of UTF-8 JSON (``rows``, ``cols``, ``column_names``,
``labels``, ``ids``, ``name``), then ``rows * cols`` little-endian float64
values in row-major order.
"""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"CXAUGENC"


class CacheFormatError(ValueError):
    pass


def save_encoded(path, matrix, labels, ids=None, column_names=None, name="") -> None:
    m = np.ascontiguousarray(matrix, dtype="<f8")
    rows, cols = m.shape
    header = {
        "rows": rows,
        "cols": cols,
        "column_names": list(column_names or []),
        "labels": [int(v) for v in labels],
        "ids": [int(v) for v in (np.arange(rows) if ids is None else ids)],
        "name": name,
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(m.tobytes())


def load_encoded(path) -> dict:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != MAGIC:
        raise CacheFormatError(f"{path}: bad magic at byte offset 0")
    (length,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + length].decode("utf-8"))
    start = 12 + length
    count = header["rows"] * header["cols"]
    if len(data) - start < 8 * count:
        raise CacheFormatError(f"{path}: truncated payload at byte offset {len(data)}")
    matrix = np.frombuffer(data, dtype="<f8", count=count, offset=start)
    header["matrix"] = matrix.astype(np.float64).reshape(header["rows"], header["cols"])
    header["labels"] = np.array(header["labels"], dtype=np.int64)
    header["ids"] = np.array(header["ids"], dtype=np.int64)
    return header
