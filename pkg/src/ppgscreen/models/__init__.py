"""Classifiers: L1 logistic regression and gradient-boosted trees."""

from __future__ import annotations

import json
from pathlib import Path

from ppgscreen.errors import MissingFileError, ParseError, SchemaError
from ppgscreen.models.common import (
    UNIT_WEIGHTS,
    ClassWeights,
    balanced_weights,
    weighted_logloss,
)
from ppgscreen.models.gbt import GbtModel, Tree, predict_gbt, train_gbt
from ppgscreen.models.logreg import (
    LogRegModel,
    logreg_objective,
    predict_logreg,
    train_logreg,
)

FORMAT_NAME = "ppgscreen-model"
FORMAT_VERSION = 1

_KINDS = {"logreg": LogRegModel, "gbt": GbtModel}


def save_model(model, path) -> None:
    """Write a fitted model as versioned JSON; floats keep full precision."""
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            break
    else:
        raise SchemaError(f"cannot serialize {type(model).__name__}")
    payload = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "kind": kind}
    payload.update(model.to_dict())
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True),
                          encoding="utf-8")


def load_model(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"model file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise SchemaError(f"not a model file: {path}")
    if payload.get("version") != FORMAT_VERSION:
        raise SchemaError(
            f"unsupported model version {payload.get('version')!r} in {path}")
    kind = payload.get("kind")
    if kind not in _KINDS:
        raise SchemaError(f"unknown model kind {kind!r} in {path}")
    try:
        return _KINDS[kind].from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed {kind} model in {path}: {exc}") from exc


def predict_model(model, X):
    """Dispatch prediction on the model type."""
    if isinstance(model, LogRegModel):
        return predict_logreg(model, X)
    if isinstance(model, GbtModel):
        return predict_gbt(model, X)
    raise SchemaError(f"cannot predict with {type(model).__name__}")
