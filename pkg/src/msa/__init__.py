"""Multiple-source adaptation with distribution-weighted combiners.

Discriminative (domain-posterior) and generative (density) weighting of
frozen source predictors, the min-max choice of the mixture parameter, and
Rényi-divergence diagnostics.
"""

__version__ = "0.1.0"

from .core import Dataset, LossSpec, MixtureWeights, project_to_simplex
from .combine import (
    dmsa_predict_probability,
    dmsa_predict_regression,
    gmsa_predict_probability,
    gmsa_predict_regression,
    induce_densities,
    map_z_prime,
    uniform_predict,
)
from .kde import kde_fit, select_bandwidth_cv
from .maxent import FeatureMap, MaxentModel, train_maxent
from .renyi import renyi_d, renyi_exp
from .zsolve import ZObjectiveContext, grid_search_z, iterative_solve_z

__all__ = [
    "Dataset", "LossSpec", "MixtureWeights", "project_to_simplex",
    "dmsa_predict_probability", "dmsa_predict_regression",
    "gmsa_predict_probability", "gmsa_predict_regression",
    "induce_densities", "map_z_prime", "uniform_predict",
    "kde_fit", "select_bandwidth_cv",
    "FeatureMap", "MaxentModel", "train_maxent",
    "renyi_d", "renyi_exp",
    "ZObjectiveContext", "grid_search_z", "iterative_solve_z",
]
