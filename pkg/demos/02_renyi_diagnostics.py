# coding: utf-8

# # Rényi divergences
#
# The guarantees for the combined predictors are stated in terms of the
# exponentiated Rényi divergence d_alpha(P || Q) between the target and the
# (estimated) source mixtures. This notebook evaluates a few of them.

import math

import numpy as np

from msa.renyi import (
    BoundInputs,
    bound_theorem_1_2,
    histogram,
    renyi_d,
    renyi_exp,
    triangle_slack,
)
from msa.synthbench import D1, D2, sample_mixture

P = np.array([0.5, 0.5])
Q = np.array([0.25, 0.75])

# D_alpha is nondecreasing in alpha; alpha = 1 is the KL divergence and
# alpha = inf is log max P/Q.

for alpha in [0.0, 0.5, 1.0, 2.0, 10.0, math.inf]:
    print("alpha=%-4s D=%.6f d=%.6f" % (alpha, renyi_d(P, Q, alpha), renyi_exp(P, Q, alpha)))

# ## Divergence between the synthetic domains
#
# Binned on a common grid, the two domains share support only near 0, so
# for alpha > 1 the divergence is infinite while alpha < 1 stays finite.

bins = np.linspace(-50, 10, 121)
h1 = histogram(sample_mixture(D1, 20000, 0).X[:, 0], bins)
h2 = histogram(sample_mixture(D2, 20000, 1).X[:, 0], bins)
for alpha in [0.5, 2.0]:
    print("D_%g(D1 || D2) = %g" % (alpha, renyi_d(h1, h2, alpha)))

# ## The three-distribution inequality
#
# For any R, d_a(P||Q)^(a-1) is bounded by a product of two divergences
# through R. The slack (right minus left) is never negative.

rng = np.random.default_rng(0)
slacks = [triangle_slack(*(rng.dirichlet(np.ones(4)) for _ in range(3)), 2.0, 0.5) for _ in range(1000)]
print("min slack over 1000 random triples: %.3e" % min(slacks))

# ## A guarantee
#
# With per-domain loss 0.1, estimation slack 0.01, alpha = 2 and all
# divergences equal to one, the target loss is at most

print(bound_theorem_1_2(BoundInputs(epsilon=0.1, delta=0.01, alpha=2.0)))
