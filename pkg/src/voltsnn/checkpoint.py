"""JSON checkpoint container for trained networks.

Layout (all arrays little-endian, base64-encoded)::

    {
      "container": "voltsnn-checkpoint/1",
      "weights":   {"dtype": "<f8", "shape": [inputs, neurons], "data": ...},
      "theta":     {"dtype": "<f8", "shape": [neurons], "data": ...},
      "label_map": [int, ...] or null,
      "storage":   {"format": "fxp8_signed_q1_6", "rounding": "RN",
                    "bytes": ..., "n_bytes": int},
      "params":    {SnnParams fields},
      "provenance": {...}
    }

``weights`` keeps the exact float state for further training; ``storage``
holds the bytes that would be written to DRAM in the chosen format.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict
from typing import Optional

import numpy as np

from . import VoltsnnError
from .fixedpoint import QuantizedTensor, Rounding, parse_format
from .snn_core import SnnModel, SnnParams

CONTAINER = "voltsnn-checkpoint/1"


class CheckpointError(VoltsnnError, ValueError):
    pass


def _pack(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "<f8", "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode()}


def _unpack(d: dict) -> np.ndarray:
    if d.get("dtype") != "<f8":
        raise CheckpointError(f"unsupported array dtype {d.get('dtype')!r}")
    return np.frombuffer(base64.b64decode(d["data"]), dtype="<f8").reshape(d["shape"]).copy()


def to_dict(model: SnnModel, stored: QuantizedTensor, rounding: Rounding, provenance: Optional[dict] = None) -> dict:
    if stored.shape != model.weights.shape:
        raise CheckpointError(f"stored tensor shape {stored.shape} != weights {model.weights.shape}")
    raw = stored.to_bytes()
    return {
        "container": CONTAINER,
        "weights": _pack(model.weights),
        "theta": _pack(model.theta),
        "label_map": None if model.label_map is None else [int(x) for x in model.label_map],
        "storage": {
            "format": stored.format.name,
            "rounding": Rounding(rounding).value,
            "n_bytes": int(raw.size),
            "bytes": base64.b64encode(raw.tobytes()).decode(),
        },
        "params": asdict(model.params),
        "provenance": provenance or {},
    }


def dumps(model: SnnModel, stored: QuantizedTensor, rounding: Rounding, provenance: Optional[dict] = None) -> str:
    return json.dumps(to_dict(model, stored, rounding, provenance), indent=1, sort_keys=True) + "\n"


def from_dict(d: dict) -> SnnModel:
    if d.get("container") != CONTAINER:
        raise CheckpointError(f"not a {CONTAINER} document")
    try:
        weights = _unpack(d["weights"])
        theta = _unpack(d["theta"])
        params = SnnParams(**d["params"])
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"malformed checkpoint: {e}") from None
    labels = d.get("label_map")
    return SnnModel(weights, theta, params, None if labels is None else np.asarray(labels, dtype=np.int64))


def stored_tensor(d: dict) -> QuantizedTensor:
    """The DRAM image saved alongside the float state."""
    s = d["storage"]
    fmt = parse_format(s["format"])
    raw = np.frombuffer(base64.b64decode(s["bytes"]), dtype=np.uint8)
    return QuantizedTensor.from_bytes(raw, fmt, tuple(d["weights"]["shape"]))


def read(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"{path}: not valid JSON ({e})") from None


def load(path) -> SnnModel:
    return from_dict(read(path))
