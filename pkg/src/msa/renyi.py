"""Rényi divergences on finite supports and evaluators for the
adaptation guarantees built on them.

All evaluators here return the right-hand side of a bound; none of them
certifies the probabilistic statement behind it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class FiniteDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if p.size < 1:
            raise ValueError("distribution needs a nonempty support")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(math.fsum(p.tolist()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, weights) -> "FiniteDistribution":
        w = np.asarray(weights, dtype=float)
        return cls(w / math.fsum(w.tolist()))

    def __len__(self) -> int:
        return self.probs.size


def histogram(samples, bins) -> FiniteDistribution:
    """Empirical distribution of 1-D samples over explicit bin edges.

    Values outside the edges are dropped; pass open-ended edges
    (``-inf``/``inf``) to keep everything.
    """
    counts, _ = np.histogram(np.asarray(samples, dtype=float).reshape(-1), bins=bins)
    if counts.sum() == 0:
        raise ValueError("no samples fall inside the bins")
    return FiniteDistribution.normalized(counts)


def _probs(P) -> np.ndarray:
    if isinstance(P, FiniteDistribution):
        return P.probs
    return FiniteDistribution(P).probs


def renyi_d(P, Q, alpha: float) -> float:
    """Rényi divergence ``D_alpha(P || Q)`` (natural log).

    ``alpha`` in {0, 1, inf} uses the limiting forms: ``-log Q(supp P)``,
    relative entropy and ``log max P_i/Q_i``. Returns ``math.inf`` when the
    divergence is infinite.
    """
    p, q = _probs(P), _probs(Q)
    if p.shape != q.shape:
        raise ValueError(f"support sizes differ: {p.size} vs {q.size}")
    if not alpha >= 0:
        raise ValueError("alpha must be nonnegative")
    supp = p > 0
    ps, qs = p[supp], q[supp]
    if alpha == 0:
        mass = math.fsum(qs.tolist())
        return math.inf if mass == 0 else max(-math.log(mass), 0.0)
    if alpha < 1:
        # terms with q = 0 vanish for alpha < 1
        keep = qs > 0
        if not np.any(keep):
            return math.inf
        lp, lq = np.log(ps[keep]), np.log(qs[keep])
        return float(logsumexp(alpha * lp + (1 - alpha) * lq) / (alpha - 1))
    if np.any(qs == 0):
        return math.inf
    lp, lq = np.log(ps), np.log(qs)
    if alpha == 1:
        return float(math.fsum((ps * (lp - lq)).tolist()))
    if math.isinf(alpha):
        return float(np.max(lp - lq))
    return float(logsumexp(alpha * lp + (1 - alpha) * lq) / (alpha - 1))


def renyi_exp(P, Q, alpha: float) -> float:
    """``d_alpha(P || Q) = exp(D_alpha(P || Q))``; ``math.inf`` if infinite."""
    D = renyi_d(P, Q, alpha)
    return math.inf if D > 700 else math.exp(D)


def triangle_slack(P, Q, R, alpha: float, gamma: float) -> float:
    """Slack ``RHS - LHS`` of the three-distribution Rényi inequality

        d_a(P||Q)^(a-1) <= d_{a/g}(P||R)^(a-g) * d_{(a-g)/(1-g)}(R||Q)^(a-1)

    computed in log space. Returns ``math.inf`` when the right side is
    infinite (the inequality then holds trivially).
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if not alpha > gamma:
        raise ValueError("alpha must exceed gamma")
    D_pq = renyi_d(P, Q, alpha)
    D_pr = renyi_d(P, R, alpha / gamma)
    D_rq = renyi_d(R, Q, (alpha - gamma) / (1 - gamma))
    log_rhs = _scaled(alpha - gamma, D_pr) + _scaled(alpha - 1, D_rq)
    log_lhs = _scaled(alpha - 1, D_pq)
    if math.isnan(log_rhs):
        # inf - inf: P||R infinite and R||Q infinite with negative exponent
        return math.inf
    if log_rhs == math.inf:
        return math.inf
    if log_lhs == math.inf:
        return -math.inf
    return math.exp(log_rhs) - math.exp(log_lhs)


def _scaled(c: float, D: float) -> float:
    if c == 0:
        return 0.0
    return c * D


# ---------------------------------------------------------------------------
# bound evaluators


@dataclass(frozen=True)
class BoundInputs:
    """Inputs shared by the general guarantees.

    ``d_hat`` is the worst-case ``d_alpha(estimate_k || D_k)``, ``d_hat_prime``
    the worst-case ``d_{2 alpha - 1}(D_k || estimate_k)`` and ``d_target`` the
    divergence of the target from the (estimated) mixture family.
    """

    epsilon: float
    delta: float
    alpha: float
    M: float = 1.0
    d_hat: float = 1.0
    d_hat_prime: float = 1.0
    d_target: float = 1.0

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if self.epsilon < 0 or self.M < 0 or self.delta < 0:
            raise ValueError("epsilon, delta and M must be nonnegative")
        for name in ("d_hat", "d_hat_prime", "d_target"):
            if getattr(self, name) < 1 - 1e-12:
                raise ValueError(f"{name} is an exponentiated divergence and must be >= 1")


def _powers(alpha: float) -> tuple[float, float]:
    if math.isinf(alpha):
        return 1.0, 0.0
    return (alpha - 1) / alpha, 1 / alpha


def epsilon_hat(inputs: BoundInputs) -> float:
    a, b = _powers(inputs.alpha)
    return (inputs.epsilon * inputs.d_hat) ** a * inputs.M**b


def bound_theorem_1_2(inputs: BoundInputs) -> float:
    """Guarantee for a distribution-weighted combiner in terms of the
    divergence between the target and the estimated mixture family:
    ``[(eps_hat + delta) d_target]^((a-1)/a) M^(1/a)``.

    Identical for the density-based and posterior-based combiners.
    """
    a, b = _powers(inputs.alpha)
    return ((epsilon_hat(inputs) + inputs.delta) * inputs.d_target) ** a * inputs.M**b


def bound_theorem_4(inputs: BoundInputs, d_2alpha_target: float) -> float:
    """Guarantee against the true mixture family; ``d_2alpha_target`` is
    ``d_{2 alpha}(D_T || mixtures)``."""
    if d_2alpha_target < 1 - 1e-12:
        raise ValueError("d_2alpha_target must be >= 1")
    a, b = _powers(inputs.alpha)
    alpha = inputs.alpha
    c = 1.0 if math.isinf(alpha) else (2 * alpha - 1) / (2 * alpha)
    return (
        ((epsilon_hat(inputs) + inputs.delta) * inputs.d_hat_prime) ** a
        * d_2alpha_target**c
        * inputs.M**b
    )


class Method(enum.Enum):
    DMSA = "dmsa"
    GMSA = "gmsa"


def bound_theorem_5_6(
    kind,
    eps: float,
    p: int,
    spread: float,
    m: int,
    delta: float,
    d_star: float = 1.0,
    d_prime_star: float = 1.0,
    mu: float | None = None,
    M: float = 1.0,
) -> float:
    """Sample-size dependent guarantee.

    For ``kind=DMSA`` (posterior from conditional Maxent) ``spread`` is the
    feature norm bound ``r`` and ``mu`` the regularization::

        eps * p * exp(6 sqrt(2) r^2 / (mu sqrt(m)) * (1 + sqrt(log(1/delta)))) * d* * d'*

    For ``kind=GMSA`` (KDE densities) ``spread`` is the kernel ratio ``kappa``::

        eps^(1/4) M^(3/4) exp(6 kappa / sqrt(2 m / p) * sqrt(log p + log(1/delta))) * d* * d'*
    """
    kind = Method(kind.value if isinstance(kind, Method) else str(kind).lower())
    if m <= 0:
        raise ValueError("m must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if kind is Method.DMSA:
        if mu is None or mu <= 0:
            raise ValueError("DMSA bound needs mu > 0")
        expo = 6 * math.sqrt(2) * spread**2 / (mu * math.sqrt(m)) * (1 + math.sqrt(math.log(1 / delta)))
        return eps * p * math.exp(expo) * d_star * d_prime_star
    expo = 6 * spread / math.sqrt(2 * m / p) * math.sqrt(math.log(p) + math.log(1 / delta))
    return eps**0.25 * M**0.75 * math.exp(expo) * d_star * d_prime_star
