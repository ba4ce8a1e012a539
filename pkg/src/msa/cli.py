"""``msa`` command-line entry point.

Every JSON output embeds a ``manifest`` block; CSV outputs get a
``<file>.manifest.json`` sidecar. Exit codes: 0 success, 1 runtime error,
2 usage error. ``MSA_THREADS`` caps the worker count of ``msa synth``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .combine import DEFAULT_ETA, mix_weights, combine_outputs, _scores
from .core import LossModel, LossSpec, read_csv
from .kde import KdeModel, bandwidth_cv_scores, kde_fit, select_bandwidth_cv
from .maxent import FeatureMap, MaxentModel, train_maxent
from .predictors import load_predictors, save_predictors
from .renyi import BoundInputs, bound_theorem_1_2, bound_theorem_4, bound_theorem_5_6, renyi_d, renyi_exp
from .synthbench import ExperimentConfig, run_synthetic, train_base_predictor
from .zsolve import ZObjectiveContext, balance_report, grid_search_z, iterative_solve_z


class UsageError(Exception):
    pass


def _digest_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, allow_nan=True).encode()


def manifest(command: str, argv, payload, inputs=(), seeds=None, config=None, started=None) -> dict:
    return {
        "command": command,
        "argv": list(argv),
        "config_hash": hashlib.sha256(_canonical(config)).hexdigest() if config is not None else None,
        "seeds": seeds or {},
        "inputs": {str(p): _digest_file(p) for p in inputs},
        "tool_version": __version__,
        "wall_clock_seconds": None if started is None else time.perf_counter() - started,
        "payload_sha256": hashlib.sha256(_canonical(payload)).hexdigest(),
    }


def _write_json(path, payload: dict, man: dict) -> None:
    out = dict(payload)
    out["manifest"] = man
    text = json.dumps(out, indent=2)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _read_column(path) -> np.ndarray:
    vals = []
    with _require(path).open(newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            if len(row) != 1:
                raise ValueError(f"{path}:{i + 1}: expected a single column")
            try:
                vals.append(float(row[0]))
            except ValueError:
                if i == 0:
                    continue  # header
                raise
    return np.array(vals)


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        return np.geomspace(float(lo), float(hi), int(n))
    except ValueError:
        raise UsageError(f"--grid expects lo:hi:n, got {text!r}") from None


def _loss_spec(args) -> LossSpec:
    if args.loss == "squared":
        return LossSpec.squared(args.M)
    return LossSpec.cross_entropy(args.M)


def _load_weighting(path):
    """Posterior JSON file or a directory of per-domain KDE JSON files."""
    path = _require(path)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise FileNotFoundError(f"no KDE models in {path}")
        objs = [json.loads(f.read_text()) for f in files]
        objs.sort(key=lambda o: int(o.get("domain", 0)))
        return "densities", [KdeModel.from_dict(o) for o in objs], files
    return "posterior", MaxentModel.load(path), [path]


# ---------------------------------------------------------------------------
# subcommands


def cmd_renyi(args, argv):
    P, Q = _read_column(args.P), _read_column(args.Q)
    value = renyi_exp(P, Q, args.alpha) if args.exp else renyi_d(P, Q, args.alpha)
    print(repr(float(value)))


def cmd_bounds(args, argv):
    t = args.theorem
    if t in ("1", "2", "4"):
        inputs = BoundInputs(args.epsilon, args.delta, args.alpha, args.M, args.d_hat, args.d_hat_prime,
                             args.d_target)
        value = bound_theorem_1_2(inputs) if t in ("1", "2") else bound_theorem_4(inputs, args.d_2alpha_target)
    elif t == "5":
        value = bound_theorem_5_6("dmsa", args.epsilon, args.p, args.r, args.m, args.delta,
                                  args.d_star, args.d_prime_star, mu=args.mu)
    else:
        value = bound_theorem_5_6("gmsa", args.epsilon, args.p, args.kappa, args.m, args.delta,
                                  args.d_star, args.d_prime_star, M=args.M)
    payload = {"theorem": t, "value": value}
    _write_json(args.out, payload, manifest("bounds", argv, payload, config=vars_clean(args)))


def vars_clean(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}


def cmd_kde(args, argv):
    started = time.perf_counter()
    data = read_csv(_require(args.data))
    X = data.X if args.domain is None else data.X[data.domain == args.domain]
    if X.shape[0] == 0:
        raise ValueError(f"domain {args.domain} has no samples in {args.data}")
    grid = _parse_grid(args.grid)
    if args.bandwidth == "auto":
        scores = bandwidth_cv_scores(X, grid, args.folds, args.seed)
        sigma = select_bandwidth_cv(X, grid, args.folds, args.seed)
    else:
        sigma, scores = float(args.bandwidth), np.array([])
    model = kde_fit(X, sigma)
    payload = {"domain": args.domain, "sigma": sigma, "grid": grid.tolist(), "cv_scores": scores.tolist()}
    payload.update(model.to_dict())
    _write_json(args.out, payload, manifest("kde", argv, payload, [args.data], {"seed": args.seed},
                                            vars_clean(args), started))


def cmd_train_posterior(args, argv):
    started = time.perf_counter()
    data = read_csv(_require(args.data))
    if args.feature_map == "rff":
        fmap = FeatureMap.random_fourier(data.d, args.rff_width, args.rff_bandwidth, args.seed)
    else:
        fmap = FeatureMap.linear(data.d)
    mu = "cv" if args.mu == "auto" else float(args.mu)
    model = train_maxent(data, mu, fmap, tol=args.tol, max_iters=args.max_iters, seed=args.seed)
    payload = model.to_dict()
    payload.update(iterations=model.iterations, converged=model.converged, grad_norm=model.grad_norm)
    _write_json(args.out, payload, manifest("train-posterior", argv, payload, [args.data],
                                            {"seed": args.seed}, vars_clean(args), started))


def cmd_train_base(args, argv):
    data = read_csv(_require(args.data))
    preds = [train_base_predictor(data.of_domain(k), args.mu) for k in range(data.p)]
    save_predictors(args.out, preds, LossModel.REGRESSION)


def cmd_solve_z(args, argv):
    started = time.perf_counter()
    cal = read_csv(_require(args.calibration))
    kind, weighting, wfiles = _load_weighting(args.weighting)
    predictors = load_predictors(_require(args.predictors))
    spec = _loss_spec(args)
    if kind == "posterior":
        ctx = ZObjectiveContext.from_posterior(cal, weighting, predictors, spec, args.eta)
    else:
        ctx = ZObjectiveContext.from_densities(cal, weighting, predictors, spec, args.eta)
    if args.method == "grid":
        sol = grid_search_z(ctx, args.resolution)
    else:
        sol = iterative_solve_z(ctx, max_iters=args.max_iters)
    payload = sol.to_dict()
    payload.update(spread=balance_report(sol), weighting=kind)
    inputs = [args.calibration, args.predictors, *wfiles]
    _write_json(args.out, payload, manifest("solve-z", argv, payload, inputs, None, vars_clean(args), started))


def cmd_predict(args, argv):
    data = read_csv(_require(args.input))
    kind, weighting, wfiles = _load_weighting(args.weighting)
    predictors = load_predictors(_require(args.predictors))
    zobj = json.loads(_require(args.z).read_text())
    if kind == "posterior":
        if weighting.d != data.d:
            raise ValueError(f"posterior expects {weighting.d} features, input has {data.d}")
        z = np.array(zobj.get("z_prime", zobj["z"]), dtype=float)
    else:
        if weighting[0].d != data.d:
            raise ValueError(f"KDE expects {weighting[0].d} features, input has {data.d}")
        z = np.array(zobj["z"], dtype=float)
    scores = _scores(weighting, data.X)
    W = mix_weights(z, scores, args.eta)
    H = predictors.outputs(data.X)
    pred = combine_outputs(W, H)
    p = W.shape[1]
    score_name = "q" if kind == "posterior" else "density"
    pred_cols = ["prediction"] if pred.ndim == 1 else [f"prediction_{c}" for c in range(pred.shape[1])]
    header = pred_cols + [f"w_{k}" for k in range(p)] + [f"{score_name}_{k}" for k in range(p)]
    out = Path(args.out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.m):
            row = [pred[i]] if pred.ndim == 1 else list(pred[i])
            w.writerow([_fmt(v) for v in row] + [_fmt(v) for v in W[i]] + [_fmt(v) for v in scores[i]])
    payload = {"predictions_sha256": _digest_file(out), "rows": data.m}
    man = manifest("predict", argv, payload, [args.input, args.predictors, args.z, *wfiles],
                   config=vars_clean(args))
    Path(str(out) + ".manifest.json").write_text(json.dumps(man, indent=2) + "\n")


def cmd_synth(args, argv):
    started = time.perf_counter()
    if args.config == "default":
        config = ExperimentConfig()
    else:
        config = ExperimentConfig.from_dict(json.loads(_require(args.config).read_text()))
    if args.seed is not None:
        config.seed = args.seed
    if args.runs is not None:
        config.runs = args.runs
    if args.sizes:
        config.sizes = [int(s) for s in args.sizes.split(",")]
    if args.method is not None:
        config.method = args.method
    if args.grid_resolution is not None:
        config.resolution = args.grid_resolution
    if args.mu is not None:
        config.maxent_mu = "cv" if args.mu in ("auto", "cv") else float(args.mu)
    if args.eta is not None:
        config.eta = args.eta
    if args.variance_convention is not None:
        config.variance_convention = args.variance_convention == "variance"
    config.workers = int(os.environ.get("MSA_THREADS", config.workers))
    report = run_synthetic(config)
    payload = report.to_dict()
    inputs = [] if args.config == "default" else [args.config]
    _write_json(args.out, payload, manifest("synth", argv, payload, inputs, {"seed": config.seed},
                                            config.to_dict(), started))
    if args.curves:
        with Path(args.curves).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "target", "m", "mean_acc", "std_acc"])
            for row in report.curves():
                w.writerow([row["method"], row["target"], row["m"], _fmt(row["mean_acc"]), _fmt(row["std_acc"])])


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msa", description="Multiple-source adaptation toolkit.",
                                     epilog="Environment: MSA_THREADS caps the worker count for `msa synth`.")
    parser.add_argument("--version", action="version", version=f"msa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("renyi", help="Rényi divergence between two single-column probability CSVs")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--exp", action="store_true", help="print d_alpha = exp(D_alpha) instead")
    p.add_argument("P")
    p.add_argument("Q")
    p.set_defaults(func=cmd_renyi)

    p = sub.add_parser("bounds", help="evaluate a guarantee's right-hand side")
    p.add_argument("--theorem", choices=["1", "2", "4", "5", "6"], required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--d-hat", type=float, default=1.0)
    p.add_argument("--d-hat-prime", type=float, default=1.0)
    p.add_argument("--d-target", type=float, default=1.0)
    p.add_argument("--d-2alpha-target", type=float, default=1.0)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--d-star", type=float, default=1.0)
    p.add_argument("--d-prime-star", type=float, default=1.0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("kde", help="fit a per-domain KDE with cross-validated bandwidth")
    p.add_argument("data")
    p.add_argument("--domain", type=int, default=None)
    p.add_argument("--bandwidth", default="auto", help="'auto' or a positive number")
    p.add_argument("--grid", default="0.02:5:20", help="geometric grid lo:hi:n")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_kde)

    p = sub.add_parser("train-posterior", help="train the conditional Maxent domain posterior")
    p.add_argument("data")
    p.add_argument("--mu", default="auto", help="'auto' (5-fold CV) or a value")
    p.add_argument("--feature-map", choices=["linear", "rff"], default="linear")
    p.add_argument("--rff-width", type=int, default=100)
    p.add_argument("--rff-bandwidth", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_train_posterior)

    p = sub.add_parser("train-base", help="fit one linear ±1 classifier per domain")
    p.add_argument("data")
    p.add_argument("--mu", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_base)

    p = sub.add_parser("solve-z", help="choose the mixture parameter z on labeled calibration data")
    p.add_argument("--method", choices=["grid", "iter"], default="grid")
    p.add_argument("--resolution", "--grid-resolution", dest="resolution", type=int, default=None)
    p.add_argument("--calibration", required=True)
    p.add_argument("--weighting", required=True, help="posterior JSON or a directory of KDE JSON files")
    p.add_argument("--predictors", required=True)
    p.add_argument("--loss", choices=["squared", "cross_entropy"], default="squared")
    p.add_argument("--M", type=float, default=50.0)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_solve_z)

    p = sub.add_parser("predict", help="combined predictions for an input CSV")
    p.add_argument("input")
    p.add_argument("--weighting", required=True)
    p.add_argument("--predictors", required=True)
    p.add_argument("--z", required=True)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="run the synthetic two-domain benchmark")
    p.add_argument("--config", default="default", help="'default' or a JSON config file")
    p.add_argument("--out", default="report.json")
    p.add_argument("--curves", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--sizes", default=None, help="comma-separated sample sizes")
    p.add_argument("--method", choices=["grid", "iter"], default=None)
    p.add_argument("--grid-resolution", type=int, default=None)
    p.add_argument("--mu", default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--variance-convention", choices=["std", "variance"], default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"msa: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"msa {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
