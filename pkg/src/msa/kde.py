"""Isotropic Gaussian KDE with a single cross-validated bandwidth per domain."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

DENSITY_FLOOR = 1e-300


def _as_points(x, d=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if d in (None, 1) else x.reshape(1, -1)
    return x


def kernel_value(x, xprime, sigma: float) -> float:
    """Normalized isotropic Gaussian kernel ``(2 pi s^2)^(-d/2) exp(-|x-x'|^2 / (2 s^2))``."""
    if not sigma > 0:
        raise ValueError("bandwidth must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xprime = np.atleast_1d(np.asarray(xprime, dtype=float))
    d = x.size
    diff = x - xprime
    sq = float(diff @ diff)
    return (2 * math.pi * sigma**2) ** (-d / 2) * math.exp(-sq / (2 * sigma**2))


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] == 1:
        return (A - B.T) ** 2
    return np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)


@dataclass(frozen=True)
class KdeModel:
    centers: np.ndarray
    sigma: float

    def __post_init__(self):
        c = _as_points(self.centers)
        if c.shape[0] < 1:
            raise ValueError("KDE needs at least one center")
        if not self.sigma > 0:
            raise ValueError("bandwidth must be positive")
        # lexicographic order fixes the summation order
        c = c[np.lexsort(c.T[::-1])]
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def log_density(self, X) -> np.ndarray:
        X = _as_points(X, self.d)
        s2 = self.sigma**2
        lk = -_sqdist(X, self.centers) / (2 * s2) - 0.5 * self.d * math.log(2 * math.pi * s2)
        return logsumexp(lk, axis=1) - math.log(self.centers.shape[0])

    def density(self, X) -> np.ndarray:
        return np.maximum(np.exp(self.log_density(X)), DENSITY_FLOOR)

    __call__ = density

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "d": self.d, "centers": self.centers.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "KdeModel":
        return cls(np.array(obj["centers"], dtype=float).reshape(-1, int(obj.get("d", 1))), float(obj["sigma"]))

    @classmethod
    def load(cls, path) -> "KdeModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def kde_fit(samples, sigma: float) -> KdeModel:
    samples = _as_points(samples)
    if samples.shape[0] == 0:
        raise ValueError("no samples")
    return KdeModel(samples, float(sigma))


def kde_density(model: KdeModel, x) -> np.ndarray | float:
    """Density estimate at ``x``; floored at 1e-300 so it is never zero."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and model.d > 1)
    out = model.density(x)
    return float(out[0]) if single else out


def bandwidth_cv_scores(samples, grid, folds: int = 5, seed: int = 0) -> np.ndarray:
    """Mean held-out log density for every bandwidth in ``grid``."""
    X = _as_points(samples)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("empty bandwidth grid")
    if folds < 2:
        raise ValueError("need at least two folds")
    if X.shape[0] < folds:
        raise ValueError(f"need at least {folds} samples for {folds}-fold CV")
    perm = np.random.default_rng(seed).permutation(X.shape[0])
    parts = np.array_split(perm, folds)
    total = np.zeros(grid.size)
    d = X.shape[1]
    for i in range(folds):
        held = X[np.sort(parts[i])]
        train = X[np.sort(np.concatenate([parts[j] for j in range(folds) if j != i]))]
        D2 = _sqdist(held, train)
        dmin = D2.min(axis=1, keepdims=True)
        excess = D2 - dmin
        for g, s in enumerate(grid):
            c = -1.0 / (2 * s * s)
            # shift by the nearest center so the largest term is exp(0)
            lse = np.log(np.exp(excess * c).sum(axis=1)) + dmin[:, 0] * c
            total[g] += float(np.sum(lse)) - held.shape[0] * (
                0.5 * d * math.log(2 * math.pi * s * s) + math.log(train.shape[0]))
    return total / X.shape[0]


def select_bandwidth_cv(samples, grid, folds: int = 5, seed: int = 0) -> float:
    """Grid bandwidth with the best held-out log density; ties go to the larger one."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 1:
        return float(grid[0])
    scores = bandwidth_cv_scores(samples, grid, folds, seed)
    if not np.any(np.isfinite(scores)):
        raise ValueError("every bandwidth gives -inf held-out log density; widen the grid")
    best = max(range(grid.size), key=lambda i: (scores[i] if np.isfinite(scores[i]) else -np.inf, grid[i]))
    return float(grid[best])


@dataclass(frozen=True)
class KappaReport:
    kappa: float
    n_points: int
    # the sup over the whole space is infinite for Gaussian kernels
    unbounded_in_theory: bool = True


def estimate_kappa(model: KdeModel, eval_points) -> KappaReport:
    """Largest kernel ratio ``K(x, x') / K(x, x'')`` over triples from ``eval_points``."""
    P = _as_points(eval_points, model.d)
    if P.shape[0] < 2:
        raise ValueError("need at least two evaluation points")
    D2 = _sqdist(P, P)
    gap = float(np.max(D2.max(axis=1) - D2.min(axis=1)))
    log_kappa = gap / (2 * model.sigma**2)
    return KappaReport(math.exp(log_kappa) if log_kappa < 709 else math.inf, P.shape[0])
