"""L2-regularized conditional Maxent (multinomial logistic regression) over
domain labels, used as the domain posterior ``Q(k | x)``.

The per-class feature map places a base feature vector ``B(x)`` in block
``k`` of ``Phi(x, k)``, so ``w . Phi(x, k) = W[k] . B(x)`` with ``W`` the
weights reshaped to ``(p, q)``.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .core import Dataset

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-300


class FeatureKind(enum.Enum):
    PER_CLASS_LINEAR = "linear"
    RANDOM_FOURIER = "rff"


@dataclass(frozen=True)
class FeatureMap:
    """Base features shared by all classes.

    ``linear``: ``B(x) = (x, 1)``. ``rff``: ``B(x) = (sqrt(2/width) cos(x @ W + b), 1)``
    with ``W ~ N(0, 1/bandwidth^2)``, approximating a Gaussian-kernel feature space.
    """

    kind: FeatureKind = FeatureKind.PER_CLASS_LINEAR
    d: int = 1
    width: int = 0
    bandwidth: float = 1.0
    seed: int = 0
    _omega: np.ndarray | None = field(default=None, repr=False, compare=False)
    _phase: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind is FeatureKind.RANDOM_FOURIER:
            if self.width < 1 or not self.bandwidth > 0:
                raise ValueError("random Fourier features need width >= 1 and bandwidth > 0")
            rng = np.random.default_rng(self.seed)
            object.__setattr__(self, "_omega", rng.normal(0.0, 1.0 / self.bandwidth, (self.d, self.width)))
            object.__setattr__(self, "_phase", rng.uniform(0.0, 2 * np.pi, self.width))

    @classmethod
    def linear(cls, d: int) -> "FeatureMap":
        return cls(FeatureKind.PER_CLASS_LINEAR, d)

    @classmethod
    def random_fourier(cls, d: int, width: int, bandwidth: float, seed: int = 0) -> "FeatureMap":
        return cls(FeatureKind.RANDOM_FOURIER, d, width, bandwidth, seed)

    @property
    def q(self) -> int:
        """Dimension of the base features (block size)."""
        return self.d + 1 if self.kind is FeatureKind.PER_CLASS_LINEAR else self.width + 1

    def output_dim(self, p: int) -> int:
        return p * self.q

    def base(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[1]}")
        ones = np.ones((X.shape[0], 1))
        if self.kind is FeatureKind.PER_CLASS_LINEAR:
            return np.hstack([X, ones])
        Z = np.sqrt(2.0 / self.width) * np.cos(X @ self._omega + self._phase)
        return np.hstack([Z, ones])

    def phi(self, x, k: int, p: int) -> np.ndarray:
        """Full joint feature vector ``Phi(x, k)`` of length ``p * q``."""
        out = np.zeros(self.output_dim(p))
        out[k * self.q:(k + 1) * self.q] = self.base(x)[0]
        return out

    def norm_bound(self, X) -> float:
        """Largest ``||Phi(x, k)||`` over the rows of ``X``."""
        return float(np.max(np.linalg.norm(self.base(X), axis=1)))


def _check(data: Dataset, mu: float):
    if data.m == 0:
        raise ValueError("no samples")
    if not data.domain_labeled:
        raise ValueError("every sample needs a domain label")
    if mu < 0:
        raise ValueError("mu must be nonnegative")


def _logits(w: np.ndarray, B: np.ndarray, p: int) -> np.ndarray:
    return B @ w.reshape(p, -1).T


def log_posterior(w: np.ndarray, B: np.ndarray, p: int) -> np.ndarray:
    z = _logits(w, B, p)
    return z - logsumexp(z, axis=1, keepdims=True)


def maxent_objective(w, data: Dataset, mu: float, feature_map: FeatureMap | None = None) -> float:
    """``mu ||w||^2 - (1/m) sum_i log p_w[k_i | x_i]`` (log-sum-exp stabilized)."""
    _check(data, mu)
    fmap = feature_map or FeatureMap.linear(data.d)
    w = np.asarray(w, dtype=float)
    B = fmap.base(data.X)
    lp = log_posterior(w, B, data.p)
    nll = -lp[np.arange(data.m), data.domain].mean()
    return float(mu * (w @ w) + nll)


def maxent_gradient(w, data: Dataset, mu: float, feature_map: FeatureMap | None = None) -> np.ndarray:
    """``2 mu w + (1/m) sum_i [E_{p_w}[Phi(x_i, .)] - Phi(x_i, k_i)]``."""
    _check(data, mu)
    fmap = feature_map or FeatureMap.linear(data.d)
    w = np.asarray(w, dtype=float)
    B = fmap.base(data.X)
    return _grad(w, B, data.domain, data.p, mu)


def _value_grad(w, B, k, p, mu):
    lp = log_posterior(w, B, p)
    m = B.shape[0]
    f = float(mu * (w @ w) - lp[np.arange(m), k].mean())
    P = np.exp(lp)
    P[np.arange(m), k] -= 1.0
    g = 2 * mu * w + (P.T @ B).reshape(-1) / m
    return f, g


def _grad(w, B, k, p, mu):
    return _value_grad(w, B, k, p, mu)[1]


@dataclass(frozen=True)
class MaxentModel:
    w: np.ndarray
    mu: float
    feature_map: FeatureMap
    p: int
    r: float = 0.0
    iterations: int = 0
    converged: bool = True
    grad_norm: float = 0.0
    seed: int = 0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if w.size != self.feature_map.output_dim(self.p):
            raise ValueError("weight vector does not match feature map dimension")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def d(self) -> int:
        return self.feature_map.d

    @property
    def weight_matrix(self) -> np.ndarray:
        return self.w.reshape(self.p, -1)

    def logits(self, X) -> np.ndarray:
        return _logits(self.w, self.feature_map.base(X), self.p)

    def predict_proba(self, X) -> np.ndarray:
        """Posterior rows ``Q(. | x)`` for each row of ``X``."""
        lp = log_posterior(self.w, self.feature_map.base(X), self.p)
        return np.maximum(np.exp(lp), PROB_FLOOR)

    __call__ = predict_proba

    def to_dict(self) -> dict:
        fm = self.feature_map
        out = {
            "kind": fm.kind.value,
            "p": self.p,
            "d": fm.d,
            "mu": self.mu,
            "r": self.r,
            "seed": self.seed,
            "weights": self.w.tolist(),
        }
        if fm.kind is FeatureKind.RANDOM_FOURIER:
            out.update(width=fm.width, bandwidth=fm.bandwidth, feature_seed=fm.seed)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "MaxentModel":
        kind = FeatureKind(obj["kind"])
        if kind is FeatureKind.PER_CLASS_LINEAR:
            fm = FeatureMap.linear(int(obj["d"]))
        else:
            fm = FeatureMap.random_fourier(int(obj["d"]), int(obj["width"]), float(obj["bandwidth"]),
                                           int(obj.get("feature_seed", 0)))
        return cls(np.array(obj["weights"], dtype=float), float(obj["mu"]), fm, int(obj["p"]),
                   r=float(obj.get("r", 0.0)), seed=int(obj.get("seed", 0)))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "MaxentModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def posterior(model: MaxentModel, x) -> np.ndarray:
    """Posterior over domains for a single feature vector ``x``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return model.predict_proba(x)[0]


class LineSearchError(RuntimeError):
    pass


def _bfgs(fun, w0, tol, max_iters):
    """BFGS with Armijo backtracking. Returns (w, f, gnorm, iters, converged)."""
    w = w0.copy()
    f, g = fun(w)
    n = w.size
    H = np.eye(n)
    history = [f]
    for it in range(max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return w, f, gnorm, it, True
        d = -H @ g
        slope = float(g @ d)
        if slope >= 0:
            H = np.eye(n)
            d = -g
            slope = -float(g @ g)
        t = 1.0
        while True:
            w_new = w + t * d
            f_new, g_new = fun(w_new)
            if not np.isfinite(f_new):
                if t < 1e-20:
                    raise LineSearchError(
                        f"line search diverged at iteration {it}: f={f!r}, |g|={gnorm:.3e}, history={history[-5:]}"
                    )
            elif f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                # no decrease representable in floating point
                return w, f, gnorm, it, False
        s, yv = w_new - w, g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            rho = 1.0 / sy
            I = np.eye(n)
            H = (I - rho * np.outer(s, yv)) @ H @ (I - rho * np.outer(yv, s)) + rho * np.outer(s, s)
        w, f, g = w_new, f_new, g_new
        history.append(f)
    gnorm = float(np.linalg.norm(g))
    return w, f, gnorm, max_iters, gnorm <= tol


MU_GRID = tuple(10.0 ** np.arange(-4, 2))


def train_maxent(
    data: Dataset,
    mu: float | str = "cv",
    feature_map: FeatureMap | None = None,
    tol: float = 1e-8,
    max_iters: int = 500,
    seed: int = 0,
    mu_grid=MU_GRID,
    folds: int = 5,
) -> MaxentModel:
    """Fit the regularized conditional Maxent model on domain-labeled data.

    ``mu="cv"`` picks the regularization from ``mu_grid`` by ``folds``-fold
    cross-validated held-out log-loss. Training starts at ``w = 0`` and is
    deterministic given ``seed`` (which only affects CV folds).
    """
    fmap = feature_map or FeatureMap.linear(data.d)
    if isinstance(mu, str):
        if mu not in ("cv", "auto"):
            raise ValueError(f"unknown mu setting {mu!r}")
        mu = select_mu_cv(data, mu_grid, fmap, folds=folds, seed=seed, tol=tol, max_iters=max_iters)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if data.m < data.p:
        raise ValueError("need at least one sample per domain")
    _check(data, mu)
    counts = np.bincount(data.domain, minlength=data.p)
    if np.any(counts == 0):
        raise ValueError(f"domains without samples: {np.flatnonzero(counts == 0).tolist()}")
    B = fmap.base(data.X)
    k = np.asarray(data.domain)
    w0 = np.zeros(fmap.output_dim(data.p))
    w, f, gnorm, iters, ok = _bfgs(lambda v: _value_grad(v, B, k, data.p, mu), w0, tol, max_iters)
    if not ok:
        logger.warning("maxent stopped after %d iterations with |grad|=%.3e > tol=%.1e", iters, gnorm, tol)
    return MaxentModel(w, float(mu), fmap, data.p, r=fmap.norm_bound(data.X),
                       iterations=iters, converged=ok, grad_norm=gnorm, seed=seed)


def kfold_indices(m: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(m)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cv_log_loss(data: Dataset, mu: float, feature_map: FeatureMap, folds: int = 5, seed: int = 0,
                tol: float = 1e-8, max_iters: int = 500) -> float:
    """Mean held-out negative log-likelihood over ``folds`` splits."""
    parts = kfold_indices(data.m, folds, seed)
    total, count = 0.0, 0
    for i, held in enumerate(parts):
        train_idx = np.sort(np.concatenate([parts[j] for j in range(folds) if j != i]))
        train = data.subset(train_idx)
        if np.any(np.bincount(train.domain, minlength=data.p) == 0):
            continue
        model = train_maxent(train, mu, feature_map, tol=tol, max_iters=max_iters, seed=seed)
        lp = log_posterior(model.w, feature_map.base(data.X[held]), data.p)
        total += -float(lp[np.arange(held.size), data.domain[held]].sum())
        count += held.size
    if count == 0:
        raise ValueError("no usable cross-validation fold")
    return total / count


def select_mu_cv(data: Dataset, grid=MU_GRID, feature_map: FeatureMap | None = None, folds: int = 5,
                 seed: int = 0, tol: float = 1e-8, max_iters: int = 500) -> float:
    fmap = feature_map or FeatureMap.linear(data.d)
    grid = [float(g) for g in grid]
    scores = [cv_log_loss(data, g, fmap, folds, seed, tol, max_iters) for g in grid]
    best = min(range(len(grid)), key=lambda i: (scores[i], -grid[i]))
    return grid[best]


def theorem3_radius(r: float, mu: float, m: int, delta: float) -> float:
    """Pointwise log-probability deviation radius between the empirical and
    population Maxent solutions: ``2 sqrt(2) r^2 / (mu sqrt(m)) (1 + sqrt(log(1/delta)))``."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if m <= 0:
        raise ValueError("m must be positive")
    return 2 * math.sqrt(2) * r**2 / (mu * math.sqrt(m)) * (1 + math.sqrt(math.log(1 / delta)))


def decision_threshold(model: MaxentModel, a: int = 0, b: int = 1) -> float:
    """Point where ``Q(a | x) = Q(b | x)`` for a 1-D linear model."""
    if model.feature_map.kind is not FeatureKind.PER_CLASS_LINEAR or model.d != 1:
        raise ValueError("threshold is defined for 1-D linear feature maps only")
    W = model.weight_matrix
    slope = W[a, 0] - W[b, 0]
    if slope == 0:
        return math.nan
    return float(-(W[a, 1] - W[b, 1]) / slope)
