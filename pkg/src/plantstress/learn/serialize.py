"""Versioned JSON container for fitted models.

Floats are written with ``repr`` precision, so a save/load round trip
reproduces predictions bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from ..features import FeatureSetId
from .forest import ForestModel
from .hierarchical import FlatWindowLogistic, HierarchicalModel
from .knn import KnnModel
from .linear import LinearModel
from .resnet1d import ResNet1dModel

FORMAT = "plantstress-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _encode(model):
    if isinstance(model, HierarchicalModel):
        return "hierarchical", {
            "level1_kind": model.level1_kind,
            "level2_kind": model.level2_kind,
            "feature_set": model.feature_set.value,
            "seed": model.seed,
            "hyper": model.hyper,
            "level1": _wrap(model.level1),
            "level2": {str(k): _wrap(v) for k, v in sorted(model.level2.items())},
            "window_scale": np.asarray(model.window_scale).tolist(),
            "feature_scale": {str(k): np.asarray(v).tolist() for k, v in sorted(model.feature_scale.items())},
        }
    if isinstance(model, FlatWindowLogistic):
        return "flat_window_logistic", model.model.to_dict()
    if isinstance(model, LinearModel):
        return "linear", model.to_dict()
    if isinstance(model, ForestModel):
        return "forest", model.to_dict()
    if isinstance(model, KnnModel):
        return "knn", model.to_dict()
    if isinstance(model, ResNet1dModel):
        return "resnet1d", model.to_dict()
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _wrap(model):
    kind, payload = _encode(model)
    return {"kind": kind, "payload": payload}


def _unwrap(d):
    kind, p = d["kind"], d["payload"]
    if kind == "hierarchical":
        return HierarchicalModel(
            _unwrap(p["level1"]),
            {int(k): _unwrap(v) for k, v in p["level2"].items()},
            p["level1_kind"], p["level2_kind"], FeatureSetId.parse(p["feature_set"]),
            p["seed"], p["hyper"], np.array(p["window_scale"], dtype=float),
            {int(k): np.array(v, dtype=float) for k, v in p["feature_scale"].items()})
    decoders = {
        "flat_window_logistic": lambda q: FlatWindowLogistic(LinearModel.from_dict(q)),
        "linear": LinearModel.from_dict,
        "forest": ForestModel.from_dict,
        "knn": KnnModel.from_dict,
        "resnet1d": ResNet1dModel.from_dict,
    }
    if kind not in decoders:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    return decoders[kind](p)


def dumps(model, meta=None) -> str:
    doc = {"format": FORMAT, "version": VERSION, "meta": meta or {}, "model": _wrap(model)}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def loads(text):
    """Return ``(model, meta)``."""
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ModelFormatError("not a plantstress model file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    return _unwrap(doc["model"]), doc.get("meta", {})


def save_model(model, path, meta=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model, meta))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
