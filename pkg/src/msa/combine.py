"""Distribution-weighted combination of frozen source predictors.

Both solutions share one form: for a point ``x`` with domain scores
``s_k(x)`` (posterior ``Q(k|x)`` for DMSA, density ``D_k(x)`` for GMSA)
the weight of predictor ``k`` is ``z_k s_k(x) / (sum_j z_j s_j(x) + eta)``.

All functions take a batch ``X`` of shape ``(n, d)``. Predictors and score
sources are callables mapping such a batch to ``(n,)`` values (regression),
``(n, |Y|)`` distributions (probability) or ``(n, p)`` scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import LossModel, MixtureWeights, as_weights

DEFAULT_ETA = 1e-8


class SmoothingError(ValueError):
    """All weighted domain scores vanish and no smoothing was requested."""


def mix_weights(z, scores, eta: float = 0.0) -> np.ndarray:
    """Per-point combination weights ``z_k s_k / (sum_j z_j s_j + eta)``.

    ``scores`` is ``(p,)`` or ``(n, p)``. With ``eta = 0`` each row sums to 1;
    with ``eta > 0`` rows sum to slightly less than 1.
    """
    z = np.asarray(z, dtype=float)
    s = np.asarray(scores, dtype=float)
    if np.any(s < 0):
        raise ValueError("domain scores must be nonnegative")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    num = z * s
    den = num.sum(axis=-1, keepdims=True) + eta
    if np.any(den <= 0):
        raise SmoothingError("all weighted domain scores are zero at some point; add smoothing eta > 0")
    return num / den


@dataclass(frozen=True)
class SourcePredictorSet:
    """The frozen per-domain predictors ``h_1 .. h_p``."""

    predictors: Sequence[Callable[[np.ndarray], np.ndarray]]
    model: LossModel = LossModel.REGRESSION

    @property
    def p(self) -> int:
        return len(self.predictors)

    def outputs(self, X) -> np.ndarray:
        """Stacked outputs: ``(n, p)`` for regression, ``(n, p, |Y|)`` for probability."""
        X = np.asarray(X, dtype=float)
        outs = [np.asarray(h(X), dtype=float) for h in self.predictors]
        if self.model is LossModel.REGRESSION:
            return np.stack([o.reshape(X.shape[0]) for o in outs], axis=1)
        H = np.stack([o.reshape(X.shape[0], -1) for o in outs], axis=1)
        if not np.allclose(H.sum(axis=-1), 1.0, rtol=0, atol=1e-10):
            raise ValueError("probability-model predictors must output normalized distributions")
        return H


def as_predictor_set(predictors, model: LossModel | None = None) -> SourcePredictorSet:
    if isinstance(predictors, SourcePredictorSet):
        return predictors
    return SourcePredictorSet(list(predictors), model or LossModel.REGRESSION)


def combine_outputs(weights: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Apply per-point weights ``(n, p)`` to stacked predictor outputs."""
    if H.ndim == 2:
        return np.einsum("nk,nk->n", weights, H)
    return np.einsum("nk,nky->ny", weights, H)


def _scores(source, X) -> np.ndarray:
    """Evaluate a score source: a callable returning ``(n, p)`` or a list of
    per-domain density callables returning ``(n,)``."""
    if callable(source):
        return np.asarray(source(X), dtype=float)
    return np.stack([np.asarray(f(X), dtype=float).reshape(-1) for f in source], axis=1)


def weighted_predict(z, score_source, predictors, X, eta: float = DEFAULT_ETA, model=None):
    z = as_weights(z)
    preds = as_predictor_set(predictors, model)
    X = np.asarray(X, dtype=float)
    W = mix_weights(z, _scores(score_source, X), eta)
    return combine_outputs(W, preds.outputs(X))


def dmsa_predict_regression(z, posterior, predictors, X, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Discriminative combination ``sum_k z_k Q(k|x) h_k(x) / (sum_j z_j Q(j|x) + eta)``."""
    return weighted_predict(z, posterior, predictors, X, eta, LossModel.REGRESSION)


def dmsa_predict_probability(z, posterior, predictors, X, eta: float = DEFAULT_ETA) -> np.ndarray:
    return weighted_predict(z, posterior, predictors, X, eta, LossModel.PROBABILITY)


def gmsa_predict_regression(z, densities, predictors, X, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Generative combination with per-domain density estimates as scores."""
    return weighted_predict(z, densities, predictors, X, eta, LossModel.REGRESSION)


def gmsa_predict_probability(z, densities, predictors, X, eta: float = DEFAULT_ETA) -> np.ndarray:
    return weighted_predict(z, densities, predictors, X, eta, LossModel.PROBABILITY)


@dataclass(frozen=True)
class PosteriorInducedDensities:
    """Densities ``D_k(x) = Q(k|x) D(x) / Q(k)`` induced by a domain posterior.

    Calling the object returns ``Q(k|x) / Q(k)``; the common factor ``D(x)``
    cancels in the combination weights and is left out.
    """

    posterior: Callable[[np.ndarray], np.ndarray]
    qhat: np.ndarray

    def __call__(self, X) -> np.ndarray:
        return np.asarray(self.posterior(X), dtype=float) / self.qhat

    @property
    def p(self) -> int:
        return self.qhat.size


def induce_densities(posterior, marginal_samples) -> PosteriorInducedDensities:
    """Estimate ``Q(k)`` as the mean posterior over samples from the pooled marginal."""
    X = getattr(marginal_samples, "X", marginal_samples)
    Q = np.asarray(posterior(np.asarray(X, dtype=float)), dtype=float)
    qhat = Q.mean(axis=0)
    small = np.flatnonzero(qhat < 1e-12)
    if small.size:
        raise ValueError(f"domain {int(small[0])} has vanishing posterior mass")
    qhat.setflags(write=False)
    return PosteriorInducedDensities(posterior, qhat)


def map_z_prime(z, qhat) -> MixtureWeights:
    """Reparameterize ``z`` so the discriminative combiner reproduces the
    generative one built on posterior-induced densities."""
    z = as_weights(z)
    qhat = np.asarray(qhat, dtype=float)
    if np.any(qhat <= 0):
        raise ValueError("posterior masses must be positive")
    r = z / qhat
    zp = r / r.sum()
    k = int(np.argmax(zp))
    zp[k] += 1.0 - zp.sum()
    return MixtureWeights(np.maximum(zp, 0.0))


def uniform_predict(predictors, X, model=None) -> np.ndarray:
    """Unweighted average of the source predictors."""
    preds = as_predictor_set(predictors, model)
    H = preds.outputs(np.asarray(X, dtype=float))
    return H.mean(axis=1)
