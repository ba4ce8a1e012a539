"""Shared types, losses, empirical expectations and simplex helpers."""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np


class LossClampWarning(RuntimeWarning):
    """Emitted when a loss value exceeds the configured bound and is clamped."""


class LossModel(enum.Enum):
    REGRESSION = "regression"
    PROBABILITY = "probability"


class LossKind(enum.Enum):
    SQUARED = "squared"
    CROSS_ENTROPY = "cross_entropy"


@dataclass(frozen=True)
class LossSpec:
    model: LossModel = LossModel.REGRESSION
    kind: LossKind = LossKind.SQUARED
    M: float = 50.0

    def __post_init__(self):
        if self.kind is LossKind.SQUARED and self.model is not LossModel.REGRESSION:
            raise ValueError("squared loss requires the regression model")
        if self.kind is LossKind.CROSS_ENTROPY and self.model is not LossModel.PROBABILITY:
            raise ValueError("cross-entropy loss requires the probability model")
        if not self.M > 0:
            raise ValueError("loss bound M must be positive")

    @classmethod
    def squared(cls, M: float = 50.0) -> "LossSpec":
        return cls(LossModel.REGRESSION, LossKind.SQUARED, M)

    @classmethod
    def cross_entropy(cls, M: float = 50.0) -> "LossSpec":
        return cls(LossModel.PROBABILITY, LossKind.CROSS_ENTROPY, M)


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: Optional[float] = None
    domain: Optional[int] = None


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Array-backed collection of samples.

    Missing labels are stored as NaN in ``y`` and missing domain ids as -1 in
    ``domain``. Insertion order is preserved.
    """

    X: np.ndarray
    y: np.ndarray
    domain: np.ndarray
    p: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("dataset must be a nonempty (m, d) array")
        m = X.shape[0]
        y = np.full(m, np.nan) if self.y is None else np.asarray(self.y, dtype=float).reshape(m)
        dom = np.full(m, -1, dtype=int) if self.domain is None else np.asarray(self.domain).astype(int).reshape(m)
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if np.any(dom >= self.p) or np.any(dom < -1):
            raise ValueError(f"domain index out of range for p={self.p}")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "domain", _readonly(dom))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], p: int) -> "Dataset":
        if not samples:
            raise ValueError("no samples")
        X = np.array([np.atleast_1d(np.asarray(s.x, dtype=float)) for s in samples])
        y = [np.nan if s.y is None else float(s.y) for s in samples]
        dom = [-1 if s.domain is None else int(s.domain) for s in samples]
        return cls(X, np.array(y), np.array(dom), p)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.m

    @property
    def samples(self) -> Iterator[Sample]:
        for x, y, k in zip(self.X, self.y, self.domain):
            yield Sample(x, None if np.isnan(y) else float(y), None if k < 0 else int(k))

    @property
    def labeled(self) -> bool:
        return bool(np.all(~np.isnan(self.y)))

    @property
    def domain_labeled(self) -> bool:
        return bool(np.all(self.domain >= 0))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.domain[idx], self.p)

    def of_domain(self, k: int) -> "Dataset":
        return self.subset(np.flatnonzero(self.domain == k))

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise ValueError("no samples")
        p = max(part.p for part in parts)
        return cls(
            np.vstack([part.X for part in parts]),
            np.concatenate([part.y for part in parts]),
            np.concatenate([part.domain for part in parts]),
            p,
        )


def read_csv(path, p: Optional[int] = None) -> Dataset:
    """Load a dataset with header ``x0,...,x{d-1},y,domain``.

    ``y`` and ``domain`` cells may be empty. When ``p`` is not given it is
    inferred as one plus the largest domain id (at least 1).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[-2:] != ["y", "domain"]:
            raise ValueError(f"{path}: header must be x0,...,x{{d-1}},y,domain")
        d = len(header) - 2
        if header[:d] != [f"x{j}" for j in range(d)]:
            raise ValueError(f"{path}: feature columns must be named x0..x{d - 1}")
        X, y, dom = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise ValueError(f"{path}:{lineno}: expected {d + 2} fields, got {len(row)}")
            X.append([float(v) for v in row[:d]])
            y.append(float(row[d]) if row[d].strip() else np.nan)
            dom.append(int(row[d + 1]) if row[d + 1].strip() else -1)
    if not X:
        raise ValueError(f"{path}: no samples")
    dom = np.array(dom, dtype=int)
    if p is None:
        p = max(1, int(dom.max()) + 1)
    return Dataset(np.array(X), np.array(y), dom, p)


def write_csv(path, data: Dataset) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(data.d)] + ["y", "domain"])
        for x, y, k in zip(data.X, data.y, data.domain):
            w.writerow(
                [format(v, ".17g") for v in x]
                + ["" if np.isnan(y) else format(y, ".17g"), "" if k < 0 else str(k)]
            )


# ---------------------------------------------------------------------------
# losses


def point_losses(spec: LossSpec, predictions, labels) -> tuple[np.ndarray, int]:
    """Vectorized pointwise loss.

    Returns the clamped losses and the number of clamp events. For the
    probability model ``predictions`` has shape (n, |Y|) and ``labels`` holds
    class indices.
    """
    labels = np.asarray(labels)
    if spec.kind is LossKind.SQUARED:
        pred = np.asarray(predictions, dtype=float).reshape(labels.shape)
        raw = (pred - labels) ** 2
    else:
        pred = np.asarray(predictions, dtype=float)
        if pred.ndim == 1:
            pred = pred.reshape(1, -1)
        idx = labels.astype(int).reshape(-1)
        ptrue = pred[np.arange(idx.size), idx]
        with np.errstate(divide="ignore"):
            raw = -np.log(ptrue)
        raw = np.where(np.isnan(raw), np.inf, raw)
    clamped = raw > spec.M
    return np.minimum(np.maximum(raw, 0.0), spec.M), int(np.count_nonzero(clamped))


def point_loss(spec: LossSpec, prediction, label) -> float:
    """Loss of a single prediction, clamped to ``[0, M]``.

    Squared: ``(h - y)**2``. Cross-entropy: ``-log h[y]``; a zero probability on
    the true label gives an infinite loss, reported through a
    :class:`LossClampWarning` and clamped to ``M``.
    """
    if spec.kind is LossKind.CROSS_ENTROPY:
        prediction = np.asarray(prediction, dtype=float).reshape(1, -1)
        if prediction[0, int(label)] == 0:
            warnings.warn("infinite loss clamped to M", LossClampWarning, stacklevel=2)
            return float(spec.M)
    losses, n_clamped = point_losses(spec, prediction, np.atleast_1d(label))
    if n_clamped:
        warnings.warn(f"loss exceeds M={spec.M}, clamped", LossClampWarning, stacklevel=2)
    return float(losses[0])


def empirical_loss(
    dataset: Dataset,
    predictor: Callable[[np.ndarray], np.ndarray],
    spec: LossSpec,
) -> float:
    """Mean loss of ``predictor`` over a labeled dataset.

    ``predictor`` maps an (m, d) array to predictions. The mean is computed with
    ``math.fsum`` so the result does not depend on sample order.
    """
    if dataset.m == 0:
        raise ValueError("no samples")
    if not dataset.labeled:
        raise ValueError("empirical_loss requires every sample to be labeled")
    losses, n_clamped = point_losses(spec, predictor(dataset.X), dataset.y)
    if n_clamped:
        warnings.warn(f"{n_clamped} losses clamped to M={spec.M}", LossClampWarning, stacklevel=2)
    return math.fsum(losses.tolist()) / dataset.m


# ---------------------------------------------------------------------------
# simplex


@dataclass(frozen=True)
class MixtureWeights:
    z: np.ndarray = field()

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if z.size == 0 or not np.all(np.isfinite(z)):
            raise ValueError("mixture weights must be finite and nonempty")
        if np.any(z < 0) or abs(math.fsum(z.tolist()) - 1.0) > 1e-12:
            raise ValueError(f"not a point of the simplex: {z}")
        object.__setattr__(self, "z", _readonly(z))

    @property
    def p(self) -> int:
        return self.z.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.z, dtype=dtype)

    def __iter__(self):
        return iter(self.z.tolist())

    def __len__(self) -> int:
        return self.z.size

    @classmethod
    def uniform(cls, p: int) -> "MixtureWeights":
        return cls(np.full(p, 1.0 / p))

    @classmethod
    def vertex(cls, k: int, p: int) -> "MixtureWeights":
        z = np.zeros(p)
        z[k] = 1.0
        return cls(z)


def project_to_simplex(v) -> MixtureWeights:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValueError("projection input must be finite and nonempty")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(v - theta, 0.0)
    # fix residual rounding so the sum is 1 to machine precision
    s = math.fsum(w.tolist())
    w = w / s
    k = int(np.argmax(w))
    w[k] += 1.0 - math.fsum(w.tolist())
    return MixtureWeights(np.maximum(w, 0.0))


def as_weights(z) -> np.ndarray:
    """Coerce ``MixtureWeights`` or a sequence to a validated float vector."""
    if isinstance(z, MixtureWeights):
        return np.asarray(z.z)
    return np.asarray(MixtureWeights(z).z)
