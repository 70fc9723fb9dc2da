"""Versioned model persistence (JSON text, self-describing).

The file stores the root vertices, the ordered split replay list (node id
plus split point -- node ids are deterministic because children are
appended in creation order), one weight block per classifier with its
excluded-vertex indices, the input affine transform, and the class table.
Replaying the splits reconstructs the tree bit-for-bit from the stored
coordinates.  See README for the format contract; ``version`` is bumped on
any incompatible change.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import DataFormatError
from .geometry import Simplex
from .learner import AffineMap, Model
from .system import NestedSystem, WeightVector

FORMAT = "nbcs-model"
VERSION = 1


def system_to_dict(system: NestedSystem) -> dict:
    return {
        "dim": system.dim,
        "root_vertices": system.root.coords.tolist(),
        "splits": [
            {"node": rec.node, "point": system.vertex(rec.vertex).tolist()}
            for rec in system.split_records
        ],
    }


def system_from_dict(payload: dict) -> NestedSystem:
    root = Simplex.from_coords(np.asarray(payload["root_vertices"], dtype=float))
    system = NestedSystem(root)
    for rec in payload["splits"]:
        system.split(int(rec["node"]), np.asarray(rec["point"], dtype=float))
    return system


def _weights_to_dict(w: WeightVector) -> dict:
    return {
        "values": w.values.tolist(),
        "excluded": np.nonzero(w.excluded)[0].tolist(),
    }


def _weights_from_dict(payload: dict) -> WeightVector:
    values = np.asarray(payload["values"], dtype=float)
    excluded = np.zeros(len(values), dtype=bool)
    excluded[payload.get("excluded", [])] = True
    return WeightVector(values, excluded)


def save_model(path, model: Model, meta: dict | None = None) -> None:
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "system": system_to_dict(model.system),
        "weights": [_weights_to_dict(w) for w in model.weights],
        "transform": {
            "scale": np.broadcast_to(
                np.asarray(model.transform.scale, dtype=float),
                np.asarray(model.transform.offset).shape,
            ).tolist(),
            "offset": np.asarray(model.transform.offset).tolist(),
        },
        "classes": [int(c) for c in model.classes],
        "q_used": model.q_used,
        "k_retained": model.k_retained,
        "C": model.C,
        "strategy": model.strategy,
        "meta": meta or {},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> Model:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"{path}: not valid JSON ({e})") from None
    if payload.get("format") != FORMAT:
        raise DataFormatError(f"{path}: not a {FORMAT} file")
    if payload.get("version") != VERSION:
        raise DataFormatError(
            f"{path}: unsupported version {payload.get('version')!r}"
        )
    system = system_from_dict(payload["system"])
    weights = [_weights_from_dict(w) for w in payload["weights"]]
    for w in weights:
        if len(w) != system.n_vertices:
            raise DataFormatError(
                f"{path}: weight vector length {len(w)} does not match "
                f"vertex count {system.n_vertices}"
            )
    tr = payload["transform"]
    return Model(
        system=system,
        weights=weights,
        transform=AffineMap(
            np.asarray(tr["scale"], dtype=float),
            np.asarray(tr["offset"], dtype=float),
        ),
        classes=np.asarray(payload["classes"], dtype=np.int64),
        q_used=int(payload["q_used"]),
        k_retained=int(payload.get("k_retained", 0)),
        C=float(payload.get("C", 1.0)),
        strategy=payload.get("strategy", "uniform"),
    )
