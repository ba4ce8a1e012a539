"""Choosing the mixture parameter ``z``.

The target is the min-max problem

    min_z  max_k L_k(z) - sum_k z_k L_k(z)

where ``L_k(z)`` is the loss of the combined predictor on the (estimated)
domain-``k`` distribution. A zero objective means all domains see the same
loss. Exhaustive lattice search is exact up to the lattice resolution and
is the reference method for small ``p``; :func:`iterative_solve_z` is a
smoothed projected-descent alternative for larger ``p``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy.special import logsumexp

from .combine import (
    DEFAULT_ETA,
    as_predictor_set,
    combine_outputs,
    induce_densities,
    map_z_prime,
    mix_weights,
    _scores,
)
from .core import Dataset, LossSpec, MixtureWeights, as_weights, point_losses, project_to_simplex

DEFAULT_RESOLUTION = {1: 1, 2: 100, 3: 40, 4: 20}
DEFAULT_TEMPERATURES = (1.0, 0.3, 0.1, 0.03, 0.01)


class LossOracle(Protocol):
    p: int

    def per_domain_losses(self, z: np.ndarray) -> np.ndarray: ...

    def z_prime(self, z: np.ndarray) -> np.ndarray: ...


@dataclass
class ZObjectiveContext:
    """Cached calibration quantities for evaluating ``L_k(z)``.

    ``domain_weights[k]`` holds per-sample weights (summing to 1) that turn
    the pooled labeled calibration set into an estimate of domain ``k``:
    sample ``x`` gets weight proportional to ``Q(k|x) / Q(k)``.
    """

    H: np.ndarray
    y: np.ndarray
    scores: np.ndarray
    domain_weights: np.ndarray
    qhat: np.ndarray
    spec: LossSpec
    eta: float = DEFAULT_ETA
    kind: str = "posterior"
    n_clamped: int = field(default=0, init=False)

    def __post_init__(self):
        if self.domain_weights.shape != (self.p, self.y.size):
            raise ValueError("domain weights must have shape (p, n)")
        if np.any(self.domain_weights.sum(axis=1) <= 0):
            raise ValueError("every domain needs positive calibration weight")

    @property
    def p(self) -> int:
        return self.qhat.size

    @classmethod
    def from_posterior(cls, calibration: Dataset, posterior, predictors, spec: LossSpec,
                       eta: float = DEFAULT_ETA, marginal=None) -> "ZObjectiveContext":
        """Discriminative setting: scores are ``Q(k|x)`` and ``Q(k)`` is estimated
        on ``marginal`` (defaults to the calibration inputs)."""
        _require_labels(calibration)
        X = calibration.X
        Q = np.asarray(posterior(X), dtype=float)
        induced = induce_densities(posterior, X if marginal is None else marginal)
        ratio = Q / induced.qhat
        W = (ratio / ratio.sum(axis=0)).T
        H = as_predictor_set(predictors, spec.model).outputs(X)
        return cls(H, np.asarray(calibration.y), Q, np.ascontiguousarray(W), induced.qhat, spec, eta, "posterior")

    @classmethod
    def from_densities(cls, calibration: Dataset, densities, predictors, spec: LossSpec,
                       eta: float = DEFAULT_ETA) -> "ZObjectiveContext":
        """Generative setting: scores are density estimates ``D_k(x)``; domain
        ``k`` is estimated by weighting pooled points with ``D_k(x) / sum_j D_j(x)``."""
        _require_labels(calibration)
        X = calibration.X
        S = _scores(densities, X)
        Qt = S / S.sum(axis=1, keepdims=True)
        W = (Qt / Qt.sum(axis=0)).T
        H = as_predictor_set(predictors, spec.model).outputs(X)
        p = S.shape[1]
        return cls(H, np.asarray(calibration.y), S, np.ascontiguousarray(W), np.full(p, 1.0 / p), spec, eta, "densities")

    def z_prime(self, z) -> np.ndarray:
        if self.kind == "densities":
            return np.asarray(z, dtype=float)
        return map_z_prime(z, self.qhat).z

    def predictions(self, z) -> np.ndarray:
        W = mix_weights(self.z_prime(z), self.scores, self.eta)
        return combine_outputs(W, self.H)

    def per_domain_losses(self, z) -> np.ndarray:
        losses, n = point_losses(self.spec, self.predictions(z), self.y)
        self.n_clamped += n
        return self.domain_weights @ losses


def _require_labels(calibration: Dataset):
    if not calibration.labeled:
        raise ValueError("solving for z needs a labeled calibration set")


def z_objective(z, ctx: LossOracle) -> tuple[float, np.ndarray]:
    """Worst-domain excess loss and the per-domain losses at ``z``."""
    z = as_weights(z)
    losses = np.asarray(ctx.per_domain_losses(z), dtype=float)
    if not np.all(np.isfinite(losses)):
        raise ValueError(f"non-finite per-domain losses: {losses}")
    # sum of nonnegative terms, so the objective is never negative
    return float(np.dot(z, losses.max() - losses)), losses


class SolveMethod(enum.Enum):
    GRID = "grid"
    ITERATIVE = "iter"


@dataclass(frozen=True)
class ZSolution:
    z: MixtureWeights
    z_prime: MixtureWeights
    objective: float
    per_domain_losses: np.ndarray
    method: SolveMethod
    iterations: int = 0
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "z": self.z.z.tolist(),
            "z_prime": self.z_prime.z.tolist(),
            "objective": self.objective,
            "per_domain_losses": np.asarray(self.per_domain_losses).tolist(),
            "method": self.method.value,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def lattice(p: int, resolution: int):
    """Simplex lattice ``{n / resolution}`` in lexicographic order of ``n``."""
    if p == 1:
        yield (resolution,)
        return
    for first in range(resolution + 1):
        for rest in lattice(p - 1, resolution - first):
            yield (first,) + rest


def _solution(ctx, z, method, iterations=0, converged=True) -> ZSolution:
    obj, losses = z_objective(z, ctx)
    zw = MixtureWeights(z) if not isinstance(z, MixtureWeights) else z
    zp = project_to_simplex(ctx.z_prime(zw.z)) if hasattr(ctx, "z_prime") else zw
    return ZSolution(zw, zp, obj, losses, method, iterations, converged)


def grid_search_z(ctx: LossOracle, resolution: int | None = None, budget: int = 10**6) -> ZSolution:
    """Exhaustive search over the simplex lattice; ties go to the
    lexicographically smallest ``z``."""
    p = ctx.p
    if resolution is None:
        resolution = DEFAULT_RESOLUTION.get(p, 10)
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    size = math.comb(resolution + p - 1, p - 1)
    if size > budget:
        raise ValueError(
            f"lattice has {size} points (> budget {budget}); lower the resolution or use the iterative solver"
        )
    best, best_z = math.inf, None
    for n in lattice(p, resolution):
        z = np.array(n, dtype=float) / resolution
        obj, _ = z_objective(z, ctx)
        if obj < best:
            best, best_z = obj, z
    return _solution(ctx, best_z, SolveMethod.GRID, iterations=size)


def _normalized_losses(ctx, z):
    return np.asarray(ctx.per_domain_losses(z / z.sum()), dtype=float)


def _surrogate(ctx, z, tau):
    L = _normalized_losses(ctx, z)
    return tau * logsumexp(L / tau) - float(np.dot(z / z.sum(), L))


def iterative_solve_z(
    ctx: LossOracle,
    init=None,
    temperatures: Sequence[float] = DEFAULT_TEMPERATURES,
    step: float = 0.1,
    max_iters: int = 500,
    tol: float = 1e-6,
    fd_step: float = 1e-6,
) -> ZSolution:
    """Projected descent on the smoothed objective
    ``tau * logsumexp(L / tau) - z . L`` while ``tau`` decreases through
    ``temperatures`` (relative to the loss scale at ``init``).

    Gradients are taken by finite differences; steps have length
    ``step / sqrt(1 + t)`` along the normalized gradient. The best point
    visited under the true objective is returned, so the result is never
    worse than ``init``.
    """
    p = ctx.p
    z = as_weights(MixtureWeights.uniform(p) if init is None else init).copy()
    best_obj, L0 = z_objective(z, ctx)
    best_z = z.copy()
    scale = max(float(np.max(np.abs(L0))), 1e-12)
    per_stage = max(1, max_iters // max(1, len(temperatures)))
    iters = 0
    converged = False
    for tau_rel in temperatures:
        tau = tau_rel * scale
        for t in range(per_stage):
            g = np.zeros(p)
            for k in range(p):
                zp = z.copy()
                zp[k] += fd_step
                zm = z.copy()
                zm[k] = max(z[k] - fd_step, 0.0)
                g[k] = (_surrogate(ctx, zp, tau) - _surrogate(ctx, zm, tau)) / (zp[k] - zm[k])
            # only the tangent component moves along the simplex
            g -= g.mean()
            gn = float(np.linalg.norm(g))
            iters += 1
            if gn == 0:
                break
            lr = step / math.sqrt(1 + t)
            if lr < tol:
                converged = True
                break
            z = project_to_simplex(z - lr * g / gn).z.copy()
            obj, _ = z_objective(z, ctx)
            if obj < best_obj:
                best_obj, best_z = obj, z.copy()
    return _solution(ctx, best_z, SolveMethod.ITERATIVE, iterations=iters, converged=converged)


def balance_report(solution: ZSolution, ctx=None) -> float:
    """Loss spread ``max_k L_k - min_{k: z_k > 1e-6} L_k`` at the solution."""
    losses = np.asarray(
        solution.per_domain_losses if ctx is None else ctx.per_domain_losses(solution.z.z), dtype=float
    )
    active = solution.z.z > 1e-6
    if losses.size <= 1 or not np.any(active):
        return 0.0
    return float(losses.max() - losses[active].min())


def solve_z(ctx: LossOracle, method="grid", resolution: int | None = None, **kwargs) -> ZSolution:
    method = SolveMethod(method.value if isinstance(method, SolveMethod) else method)
    if method is SolveMethod.GRID:
        return grid_search_z(ctx, resolution, **kwargs)
    return iterative_solve_z(ctx, **kwargs)
