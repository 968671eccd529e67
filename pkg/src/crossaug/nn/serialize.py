"""Plain-text weights format.

A weights file is a UTF-8 JSON document::

    {"format": "crossaug-weights", "version": 1,
     "header": {...free-form metadata...},
     "networks": {"<name>": {"input_shape": [...], "frozen": true,
                             "layers": [{"kind": "dense", "config": {"units": 64},
                                         "params": {"W": {"shape": [27, 64],
                                                          "data": "<base64>"}}}]}}}

``data`` is the base-64 encoding of the array's row-major little-endian
float64 bytes, so a round trip is bit-exact.
"""
from __future__ import annotations

import base64
import json

import numpy as np

from crossaug.nn.layers import layer_from_config
from crossaug.nn.network import Network

FORMAT = "crossaug-weights"
VERSION = 1


class FormatError(ValueError):
    pass


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    shape = tuple(doc["shape"])
    a = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if a.size != int(np.prod(shape)):
        raise FormatError(f"array payload has {a.size} values, shape {shape} needs {int(np.prod(shape))}")
    return a.reshape(shape)


def network_to_dict(net: Network) -> dict:
    return {
        "input_shape": list(net.input_shape),
        "frozen": net.frozen,
        "layers": [
            {
                "kind": layer.kind,
                "config": layer.config(),
                "params": {k: encode_array(v) for k, v in layer.params.items()},
            }
            for layer in net.layers
        ],
    }


def network_from_dict(doc: dict) -> Network:
    layers = [layer_from_config(spec["kind"], spec.get("config", {})) for spec in doc["layers"]]
    net = Network(layers, doc["input_shape"], rng=None)
    for layer, spec in zip(net.layers, doc["layers"]):
        for name, arr in spec.get("params", {}).items():
            value = decode_array(arr)
            if name not in layer.params or layer.params[name].shape != value.shape:
                raise FormatError(f"parameter {name} does not fit layer {layer.kind}")
            layer.params[name] = value
    return net.freeze() if doc.get("frozen") else net


def save_weights(path, networks: dict[str, Network], header: dict | None = None) -> None:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "header": header or {},
        "networks": {name: network_to_dict(net) for name, net in networks.items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_weights(path) -> tuple[dict[str, Network], dict]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != FORMAT:
        raise FormatError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')}")
    nets = {name: network_from_dict(d) for name, d in doc["networks"].items()}
    return nets, doc.get("header", {})
