# coding: utf-8

# # Two source domains, one combined predictor
#
# Each domain comes with its own linear classifier. Domain 1 is a broad
# Gaussian around -20 plus a narrow spike at 0; domain 2 is concentrated at
# 3 and 5 with a small spike at 0. The labelling function is -1 on
# [-0.5, 0.5] and on [3.5, inf), so neither source classifier is right
# everywhere, and near 0 the two domains overlap.
#
# We compare three ways of combining the two classifiers:
#
# * `dmsa` -- weights from a domain posterior Q(k|x) (conditional Maxent)
# * `gmsa` -- weights from per-domain kernel density estimates
# * `unif` -- plain average

import numpy as np

from msa.synthbench import D1, D2, ExperimentConfig, run_synthetic, sample_mixture

# ## The two domains

x1 = sample_mixture(D1, 2000, seed=0).X[:, 0]
x2 = sample_mixture(D2, 2000, seed=1).X[:, 0]
print("domain 1: mean %.2f, fraction in [-0.5, 0.5] = %.3f" % (x1.mean(), np.mean(np.abs(x1) <= 0.5)))
print("domain 2: mean %.2f, fraction in [-0.5, 0.5] = %.3f" % (x2.mean(), np.mean(np.abs(x2) <= 0.5)))

# ## A small sweep
#
# The full benchmark uses 10 runs and sizes 100..3000 (`msa synth --config
# default`). Here two runs are enough to see the pattern.

config = ExperimentConfig(sizes=[100, 1000], runs=2, test_size=2000)
report = run_synthetic(config)

for row in sorted(report.curves(), key=lambda r: (r["m"], r["target"], r["method"])):
    print("m=%-5d %-12s %-5s acc=%.4f +- %.4f" % (row["m"], row["target"], row["method"],
                                                  row["mean_acc"], row["std_acc"]))

# The posterior's decision boundary between the domains sits between the
# spike at 0 and the mass at 3, so points near 0 are mostly attributed to
# domain 1, whose classifier gets them right.

print("Maxent 0.5-crossings at m=1000:", np.round(report.thresholds(1000), 3))
