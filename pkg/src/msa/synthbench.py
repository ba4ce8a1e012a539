"""One-dimensional two-domain benchmark comparing the discriminative and
generative combiners.

Domain 1 is ``0.9 N(-20, 8) + 0.1 N(0, 0.1)``; domain 2 puts mass at 3, 5
and 0 with relative weights 0.75 : 0.25 : 0.05 (rescaled to sum to one).
Labels are -1 on ``[-0.5, 0.5]`` and ``[3.5, inf)`` and +1 elsewhere. The
two domains overlap only near 0, where a good domain posterior lets the
combination defer to the domain-1 predictor.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .combine import DEFAULT_ETA, uniform_predict, weighted_predict
from .core import Dataset, LossSpec, as_weights
from .kde import kde_fit, select_bandwidth_cv
from .maxent import FeatureMap, decision_threshold, train_maxent
from .predictors import LinearSeparator
from .zsolve import ZObjectiveContext, balance_report, grid_search_z, iterative_solve_z

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Components as ``(weight, mean, scale)``.

    ``scale`` is a standard deviation unless ``variance=True``, in which case
    it is read as a variance.
    """

    components: tuple
    variance: bool = False

    def __post_init__(self):
        comps = tuple((float(w), float(m), float(s)) for w, m, s in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        w = np.array([c[0] for c in comps])
        if np.any(w < 0) or abs(math.fsum(w.tolist()) - 1.0) > 1e-12:
            raise ValueError("component weights must be nonnegative and sum to 1")
        if any(c[2] <= 0 for c in comps):
            raise ValueError("component scales must be positive")
        object.__setattr__(self, "components", comps)

    @classmethod
    def normalized(cls, components, variance: bool = False) -> "GaussianMixtureSpec":
        total = math.fsum(c[0] for c in components)
        return cls(tuple((w / total, m, s) for w, m, s in components), variance)

    def with_variance(self, variance: bool) -> "GaussianMixtureSpec":
        return GaussianMixtureSpec(self.components, variance)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    @property
    def stddevs(self) -> np.ndarray:
        s = np.array([c[2] for c in self.components])
        return np.sqrt(s) if self.variance else s

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., None]
        sd = self.stddevs
        dens = np.exp(-0.5 * ((x - self.means) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        return dens @ self.weights


D1 = GaussianMixtureSpec(((0.9, -20.0, 8.0), (0.1, 0.0, 0.1)))
D2 = GaussianMixtureSpec.normalized(((0.75, 3.0, 0.1), (0.25, 5.0, 0.1), (0.05, 0.0, 0.1)))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_mixture(spec: GaussianMixtureSpec, n: int, seed=0, domain: int | None = None, p: int = 2,
                   labeled: bool = True) -> Dataset:
    """Draw ``n`` i.i.d. points (component first, then the Gaussian)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    comp = rng.choice(len(spec.components), size=n, p=spec.weights)
    x = rng.normal(spec.means[comp], spec.stddevs[comp])
    y = synthetic_label(x) if labeled else None
    dom = None if domain is None else np.full(n, domain)
    return Dataset(x.reshape(-1, 1), y, dom, p)


def synthetic_label(x):
    """-1 on the closed sets [-0.5, 0.5] and [3.5, inf), +1 elsewhere."""
    x = np.asarray(x, dtype=float)
    neg = ((x >= -0.5) & (x <= 0.5)) | (x >= 3.5)
    out = np.where(neg, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def train_base_predictor(data: Dataset, mu: float = 1e-4, tol: float = 1e-8) -> LinearSeparator:
    """Linear classifier fit by L2-regularized logistic loss on ±1 labels.

    Single-class data gives a constant predictor flagged ``constant=True``.
    """
    if not data.labeled:
        raise ValueError("base predictors need labels")
    y = np.asarray(data.y)
    classes = np.unique(y)
    if classes.size == 1:
        return LinearSeparator(np.zeros(data.d), 1.0 if classes[0] > 0 else -1.0, constant=True)
    if not set(classes.tolist()) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1 or +1")
    cls_data = Dataset(data.X, None, (y > 0).astype(int), 2)
    model = train_maxent(cls_data, mu, FeatureMap.linear(data.d), tol=tol)
    W = model.weight_matrix
    diff = W[1] - W[0]
    return LinearSeparator(diff[:-1].copy(), float(diff[-1]))


def accuracy(pred, y) -> float:
    pred = np.asarray(pred, dtype=float)
    return float(np.mean(np.where(pred >= 0, 1.0, -1.0) == np.asarray(y)))


def mse(pred, y) -> float:
    return float(np.mean((np.asarray(pred, dtype=float) - np.asarray(y)) ** 2))


METRICS = {"accuracy": accuracy, "mse": mse}


def evaluate_target_mixture(lam, test_sets: Sequence[Dataset], predictor: Callable, metric="accuracy",
                            mode: str = "weight", seed=0) -> float:
    """Metric of ``predictor`` on the ``lam``-mixture of the per-domain test sets.

    ``mode="weight"`` combines per-domain metrics linearly (equivalent to
    weighting every test point of domain k by ``lam_k / n_k``);
    ``mode="resample"`` draws a mixed test set.
    """
    lam = as_weights(lam)
    if lam.size != len(test_sets):
        raise ValueError(f"mixture has {lam.size} weights for {len(test_sets)} test sets")
    fn = METRICS[metric] if isinstance(metric, str) else metric
    if mode == "weight":
        return math.fsum(
            float(l) * fn(predictor(ts.X), ts.y) for l, ts in zip(lam, test_sets) if l > 0
        )
    if mode != "resample":
        raise ValueError(f"unknown mode {mode!r}")
    rng = _rng(seed)
    n = min(ts.m for ts in test_sets)
    counts = rng.multinomial(n, lam)
    parts = [ts.subset(np.sort(rng.choice(ts.m, c, replace=True))) for ts, c in zip(test_sets, counts) if c > 0]
    mixed = Dataset.concat(parts)
    return fn(predictor(mixed.X), mixed.y)


@dataclass
class ExperimentConfig:
    sizes: list = field(default_factory=lambda: [100, 300, 1000, 3000])
    runs: int = 10
    seed: int = 0
    test_size: int = 5000
    method: str = "grid"
    resolution: int = 100
    kde_grid: list = field(default_factory=lambda: np.geomspace(0.02, 5.0, 20).tolist())
    kde_folds: int = 5
    maxent_mu: float | str = "cv"
    base_mu: float = 1e-4
    eta: float = DEFAULT_ETA
    loss_bound: float = 4.0
    lambdas: list = field(default_factory=lambda: [[0.5, 0.5]])
    variance_convention: bool = False
    hold_base_fixed: bool = False
    base_size: int = 1000
    workers: int = 1

    def __post_init__(self):
        if any(int(m) < 10 for m in self.sizes):
            raise ValueError("sample sizes must be >= 10")
        if self.runs < 1:
            raise ValueError("need at least one run")
        for lam in self.lambdas:
            as_weights(lam)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list
    runs: list

    def curves(self) -> list[dict]:
        """Rows ``method, target, m, mean_acc, std_acc`` (population std over runs)."""
        groups: dict = {}
        for r in self.records:
            groups.setdefault((r["method"], r["target"], r["m"]), []).append(r["accuracy"])
        rows = []
        for (method, target, m), accs in groups.items():
            a = np.array(accs)
            rows.append({"method": method, "target": target, "m": m,
                         "mean_acc": float(a.mean()), "std_acc": float(a.std())})
        return rows

    def mean_accuracy(self, method: str, target: str, m: int) -> float:
        for row in self.curves():
            if (row["method"], row["target"], row["m"]) == (method, target, m):
                return row["mean_acc"]
        raise KeyError((method, target, m))

    def thresholds(self, m: int) -> list[float]:
        return [r["threshold"] for r in self.runs if r["m"] == m]

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "curves": self.curves(), "runs": self.runs,
                "records": self.records}


def _target_name(lam) -> str:
    return "mix(" + ",".join(format(float(v), "g") for v in lam) + ")"


def _domain_specs(config: ExperimentConfig):
    return D1.with_variance(config.variance_convention), D2.with_variance(config.variance_convention)


def run_single(config: ExperimentConfig, m: int, run: int) -> tuple[list, dict]:
    """One paired DMSA/GMSA trial at sample size ``m``."""
    ss = np.random.SeedSequence([config.seed, run, m])
    rngs = [np.random.default_rng(s) for s in ss.spawn(4)]
    specs = _domain_specs(config)
    train = [sample_mixture(spec, m, rngs[0], domain=k) for k, spec in enumerate(specs)]
    if config.hold_base_fixed:
        base_rng = np.random.default_rng(np.random.SeedSequence([config.seed, run, 0]))
        base_sets = [sample_mixture(spec, config.base_size, base_rng, domain=k) for k, spec in enumerate(specs)]
    else:
        base_sets = train
    test = [sample_mixture(spec, config.test_size, rngs[1], domain=k) for k, spec in enumerate(specs)]
    predictors = [train_base_predictor(ds, config.base_mu) for ds in base_sets]
    pooled = Dataset.concat(train)
    spec = LossSpec.squared(config.loss_bound)

    posterior = train_maxent(pooled, config.maxent_mu, FeatureMap.linear(1), seed=int(rngs[2].integers(2**31)))
    kde_seed = int(rngs[3].integers(2**31))
    sigmas = [select_bandwidth_cv(ds.X, config.kde_grid, config.kde_folds, kde_seed) for ds in train]
    densities = [kde_fit(ds.X, s) for ds, s in zip(train, sigmas)]

    ctx_d = ZObjectiveContext.from_posterior(pooled, posterior, predictors, spec, config.eta)
    ctx_g = ZObjectiveContext.from_densities(pooled, densities, predictors, spec, config.eta)
    solve = (lambda c: grid_search_z(c, config.resolution)) if config.method == "grid" else iterative_solve_z
    sol_d, sol_g = solve(ctx_d), solve(ctx_g)

    zp = sol_d.z_prime.z
    methods = {
        "dmsa": lambda X: weighted_predict(zp, posterior, predictors, X, config.eta),
        "gmsa": lambda X: weighted_predict(sol_g.z.z, densities, predictors, X, config.eta),
        "unif": lambda X: uniform_predict(predictors, X),
    }
    targets = [("D1", [1.0, 0.0]), ("D2", [0.0, 1.0])] + [(_target_name(l), l) for l in config.lambdas]
    records = []
    for name, fn in methods.items():
        per_domain = [accuracy(fn(ts.X), ts.y) for ts in test]
        for tname, lam in targets:
            acc = math.fsum(float(l) * a for l, a in zip(lam, per_domain))
            records.append({"method": name, "target": tname, "m": m, "run": run, "accuracy": acc})
    info = {
        "m": m,
        "run": run,
        "threshold": decision_threshold(posterior),
        "maxent_mu": posterior.mu,
        "qhat": ctx_d.qhat.tolist(),
        "sigmas": sigmas,
        "z_dmsa": sol_d.z.z.tolist(),
        "z_prime_dmsa": zp.tolist(),
        "z_gmsa": sol_g.z.z.tolist(),
        "objective_dmsa": sol_d.objective,
        "objective_gmsa": sol_g.objective,
        "losses_dmsa": sol_d.per_domain_losses.tolist(),
        "losses_gmsa": sol_g.per_domain_losses.tolist(),
        "spread_dmsa": balance_report(sol_d),
        "spread_gmsa": balance_report(sol_g),
        "base_predictors": [h.to_dict() for h in predictors],
    }
    return records, info


def _task(args):
    return run_single(*args)


def run_synthetic(config: ExperimentConfig | None = None) -> ExperimentReport:
    """Full sweep over ``config.sizes`` x ``config.runs``; results are ordered by
    (size, run) regardless of the worker count."""
    config = config or ExperimentConfig()
    tasks = [(config, int(m), run) for m in config.sizes for run in range(config.runs)]
    workers = max(1, int(config.workers))
    if workers == 1:
        results = [_task(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_task, tasks))
    records, runs = [], []
    for rec, info in results:
        records.extend(rec)
        runs.append(info)
    return ExperimentReport(config, records, runs)
