# coding: utf-8

# # Choosing z
#
# The combined predictor is parameterised by a point z on the simplex. A good
# z equalises the loss across the source domains: then every mixture of the
# domains sees (nearly) the same loss. We solve for it on labeled
# calibration data, by lattice search and by smoothed projected descent.

import numpy as np

from msa.core import Dataset, LossSpec
from msa.maxent import train_maxent
from msa.synthbench import D1, D2, sample_mixture, train_base_predictor
from msa.zsolve import ZObjectiveContext, balance_report, grid_search_z, iterative_solve_z

train = [sample_mixture(D1, 500, 0, domain=0), sample_mixture(D2, 500, 1, domain=1)]
pooled = Dataset.concat(train)
predictors = [train_base_predictor(ds) for ds in train]
posterior = train_maxent(pooled, mu=1e-3)

ctx = ZObjectiveContext.from_posterior(pooled, posterior, predictors, LossSpec.squared(4.0))
print("estimated domain masses Q(k):", np.round(ctx.qhat, 4))

# ## The objective along the simplex (p = 2)

for z1 in np.linspace(0, 1, 6):
    L = ctx.per_domain_losses(np.array([z1, 1 - z1]))
    print("z=(%.1f, %.1f) losses=%s" % (z1, 1 - z1, np.round(L, 4)))

# ## Solvers

grid = grid_search_z(ctx, 100)
it = iterative_solve_z(ctx)
for sol in (grid, it):
    print("%-5s z=%s z'=%s objective=%.2e spread=%.2e" % (
        sol.method.value, np.round(sol.z.z, 3), np.round(sol.z_prime.z, 3), sol.objective, balance_report(sol)))

# z' is the reparameterisation used by the posterior-based combiner: it
# rescales z by the estimated domain masses so that the combiner behaves
# like the density-based one built from the induced densities.
