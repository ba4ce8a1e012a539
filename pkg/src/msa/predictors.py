"""Frozen source predictors with a JSON representation.

File format::

    {"model": "regression" | "probability",
     "predictors": [{"kind": "linear", "coef": [...], "intercept": b, "output": "sign" | "identity"},
                    {"kind": "softmax", "coef": [[...], ...], "intercept": [...]}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import softmax

from .combine import SourcePredictorSet
from .core import LossModel


@dataclass(frozen=True)
class LinearSeparator:
    """``sign(a . x + b)`` (ties map to +1), or the raw score when ``output="identity"``."""

    a: np.ndarray
    b: float
    constant: bool = False
    output: str = "sign"

    def score(self, X) -> np.ndarray:
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        X = np.asarray(X, dtype=float).reshape(-1, a.size)
        return X @ a + self.b

    def __call__(self, X) -> np.ndarray:
        s = self.score(X)
        if self.output == "identity":
            return s
        return np.where(s >= 0, 1.0, -1.0)

    def to_dict(self) -> dict:
        return {"kind": "linear", "coef": np.atleast_1d(self.a).tolist(), "intercept": float(self.b),
                "output": self.output, "constant": self.constant}


@dataclass(frozen=True)
class LinearSoftmax:
    """Class distribution ``softmax(W x + b)``."""

    W: np.ndarray
    b: np.ndarray

    def __call__(self, X) -> np.ndarray:
        W = np.asarray(self.W, dtype=float)
        X = np.asarray(X, dtype=float).reshape(-1, W.shape[1])
        return softmax(X @ W.T + np.asarray(self.b, dtype=float), axis=1)

    def to_dict(self) -> dict:
        return {"kind": "softmax", "coef": np.asarray(self.W).tolist(), "intercept": np.asarray(self.b).tolist()}


def predictor_from_dict(obj: dict):
    kind = obj.get("kind", "linear")
    if kind == "linear":
        return LinearSeparator(np.array(obj["coef"], dtype=float), float(obj["intercept"]),
                               bool(obj.get("constant", False)), obj.get("output", "sign"))
    if kind == "softmax":
        return LinearSoftmax(np.array(obj["coef"], dtype=float), np.array(obj["intercept"], dtype=float))
    raise ValueError(f"unknown predictor kind {kind!r}")


def save_predictors(path, predictors, model: LossModel = LossModel.REGRESSION) -> None:
    obj = {"model": model.value, "predictors": [h.to_dict() for h in predictors]}
    Path(path).write_text(json.dumps(obj, indent=2))


def load_predictors(path) -> SourcePredictorSet:
    obj = json.loads(Path(path).read_text())
    model = LossModel(obj.get("model", "regression"))
    return SourcePredictorSet([predictor_from_dict(o) for o in obj["predictors"]], model)
