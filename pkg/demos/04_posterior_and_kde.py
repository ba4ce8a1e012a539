# coding: utf-8

# # Domain scores: posterior vs. densities
#
# The two combiners differ only in how they score a point x for domain k:
# the discriminative one uses Q(k|x) from a conditional Maxent model, the
# generative one uses kernel density estimates D_k(x). In one dimension the
# difference is easy to see near the overlap at 0.

import numpy as np

from msa.combine import induce_densities, map_z_prime, mix_weights
from msa.core import Dataset
from msa.kde import estimate_kappa, kde_fit, select_bandwidth_cv
from msa.maxent import decision_threshold, train_maxent
from msa.synthbench import D1, D2, sample_mixture

train = [sample_mixture(D1, 300, 0, domain=0), sample_mixture(D2, 300, 1, domain=1)]
pooled = Dataset.concat(train)

# ## Maxent posterior, regularisation picked by 5-fold CV

posterior = train_maxent(pooled)
print("mu=%g iterations=%d converged=%s" % (posterior.mu, posterior.iterations, posterior.converged))
print("Q(domain 2 | x) = 0.5 at x = %.3f" % decision_threshold(posterior))

# ## KDE with cross-validated bandwidths

grid = np.geomspace(0.02, 5, 20)
sigmas = [select_bandwidth_cv(ds.X, grid) for ds in train]
kdes = [kde_fit(ds.X, s) for ds, s in zip(train, sigmas)]
print("bandwidths:", np.round(sigmas, 4))
# The kernel ratio kappa that enters the density-based guarantee is
# unbounded for Gaussian kernels over the whole line (it overflows to inf on
# the full sample); over a small window around the overlap it stays finite,
# but is large for the narrow domain-2 bandwidth.

window = np.linspace(-0.5, 0.5, 5).reshape(-1, 1)
print("kappa on the full sample:", [estimate_kappa(k, k.centers).kappa for k in kdes])
print("kappa on [-0.5, 0.5]:", ["%.3g" % estimate_kappa(k, window).kappa for k in kdes])

# ## Weights at a few points, z = (1/2, 1/2)

xs = np.array([[-20.0], [-0.3], [0.0], [0.3], [3.0]])
z = np.array([0.5, 0.5])
ind = induce_densities(posterior, pooled.X)
w_post = mix_weights(map_z_prime(z, ind.qhat).z, posterior(xs))
w_kde = mix_weights(z, np.stack([k.density(xs) for k in kdes], axis=1), 1e-8)
for x, a, b in zip(xs[:, 0], w_post, w_kde):
    print("x=%6.1f  posterior weights %s  kde weights %s" % (x, np.round(a, 3), np.round(b, 3)))
