"""JSON checkpoints: config echo plus named, shaped, flat parameter arrays.

Floats are written with ``repr`` semantics (the json module's default), so
a float64 round trip is bit-identical.
"""
from __future__ import annotations

import json
from typing import Any, Dict, Tuple

import numpy as np

from ..errors import FormatError
from .optim import ParamStore

FORMAT = "seglink-checkpoint"
FORMAT_VERSION = 1


def params_to_dict(params: ParamStore) -> list:
    return [{"name": name, "shape": list(t.shape), "values": t.data.reshape(-1).tolist()}
            for name, t in params.items()]


def dumps_checkpoint(params: ParamStore, config: Dict[str, Any], extra: Dict[str, Any] = None) -> str:
    doc = {"format": FORMAT, "format_version": FORMAT_VERSION, "config": config,
           "optimizer_step": params.step, "params": params_to_dict(params)}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1)


def loads_checkpoint(text: str) -> Tuple[Dict[str, Any], Dict[str, np.ndarray], dict]:
    """Parse a checkpoint; returns ``(config, {name: array}, full document)``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint is not valid JSON: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise FormatError(f"not a {FORMAT} document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {doc.get('format_version')}")
    values = {}
    for entry in doc["params"]:
        arr = np.array(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if arr.size != int(np.prod(shape)):
            raise FormatError(f"parameter {entry['name']}: {arr.size} values for shape {shape}")
        values[entry["name"]] = arr.reshape(shape)
    return doc["config"], values, doc
