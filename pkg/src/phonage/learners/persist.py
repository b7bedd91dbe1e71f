"""Versioned JSON envelope for fitted models."""

from __future__ import annotations

import hashlib
import json

from ..errors import DataError
from .core import MeanBaseline, Standardizer
from .ensemble import AdaBoostR2, RandomForest
from .svr import SvrModel
from .tree import RegressionTree

FORMAT = "phonage-model"
VERSION = 1

_VARIANTS = {
    "baseline": MeanBaseline,
    "standardizer": Standardizer,
    "tree": RegressionTree,
    "forest": RandomForest,
    "adaboost": AdaBoostR2,
    "svr": SvrModel,
}


def variant_of(model) -> str:
    for name, cls in _VARIANTS.items():
        if isinstance(model, cls):
            return name
    raise DataError(f"unknown model type {type(model).__name__}")


def config_fingerprint(config) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def model_to_envelope(model, config=None) -> dict:
    config = config or {}
    return {
        "format": FORMAT,
        "version": VERSION,
        "variant": variant_of(model),
        "config_fingerprint": config_fingerprint(config),
        "payload": model.to_dict(),
    }


def model_from_envelope(envelope: dict):
    if envelope.get("format") != FORMAT:
        raise DataError(f"not a {FORMAT} document")
    if envelope.get("version") != VERSION:
        raise DataError(
            f"unsupported model version {envelope.get('version')!r}, expected {VERSION}"
        )
    variant = envelope.get("variant")
    cls = _VARIANTS.get(variant)
    if cls is None:
        raise DataError(f"unknown model variant {variant!r}")
    return cls.from_dict(envelope["payload"])


def save_model(model, path, config=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_envelope(model, config), fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_envelope(json.load(fh))
