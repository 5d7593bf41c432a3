"""Command-line entry point: ``graphmeta <subcommand> ...``.

Exit codes: 0 success, 1 input or runtime error, 2 profile finished with
properties that could not be evaluated.  Options given on the command line
win over a ``--config`` JSON file, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, fields, replace

import numpy as np

from . import experiment as ex
from . import generator as gen
from . import msglasso as ml
from . import separability as sep
from .graph import GraphFormatError, load_features, load_graph, load_labels, write_features, write_graph, write_labels
from .properties import profile
from .svgchart import write_line_chart

logger = logging.getLogger("graphmeta")


class CliError(Exception):
    pass


def _read_json(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}") from None


def _dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _merge(defaults: dict, config: dict, flags: dict) -> dict:
    """Defaults, overridden by config entries, overridden by flags that were given."""
    out = dict(defaults)
    out.update({k: v for k, v in config.items() if k in defaults})
    unknown = sorted(set(config) - set(defaults))
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    out.update({k: v for k, v in flags.items() if v is not None})
    return out


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ------------------------------------------------------------------ profile


def cmd_profile(args) -> int:
    g = load_graph(args.graph, format=args.format, directed=args.directed)
    x = load_features(args.features, g) if args.features else None
    y = load_labels(args.labels, g) if args.labels else None
    name = args.dataset or os.path.splitext(os.path.basename(args.graph))[0]
    pv = profile(g, x, y, dataset=name, n_jobs=args.threads)
    prefix = args.out or name
    with open(prefix + ".csv", "w", newline="") as fh:
        fh.write(pv.to_csv())
    with open(prefix + ".json", "w") as fh:
        fh.write(pv.to_json() + "\n")
    bad = {k: v for k, v in pv.flags.items() if not v.startswith("missing input")}
    for k, v in pv.flags.items():
        logger.warning("%s: %s", k, v)
    return 2 if bad else 0


# ------------------------------------------------------------------ regress


def cmd_regress(args) -> int:
    table = ml.build_table(ml.read_named_csv(args.properties), ml.read_named_csv(args.performance), args.missing)
    std, scaling = ml.standardize(table)
    report = {"datasets": list(std.rows), "dropped_columns": list(scaling.dropped)}
    if args.path:
        path = ml.regularization_path(std, ratio=args.ratio, k=args.k, min_ratio=args.min_ratio)
        report["path"] = [
            {"lambda1": cm.lambda1, "lambda_g": cm.lambda_g, "support_size": len(cm.support),
             "support": [std.x_names[j] for j in cm.support], "converged": cm.converged}
            for cm in path
        ]
        if args.cv:
            grid, err = ml.cross_validate(std, ratio=args.ratio, k=args.k, min_ratio=args.min_ratio)
            best = int(np.argmin(err))
            report["cv_error"] = err.tolist()
            cm = path[best]
        else:
            cm = path[-1]
    else:
        if args.lambda1 is None:
            raise CliError("give --lambda1 (and optionally --lambda-g) or --path")
        lam_g = args.lambda1 * args.ratio if args.lambda_g is None else args.lambda_g
        cm = ml.solve(std, args.lambda1, lam_g)
    prefix = args.out
    ml.write_coefficients(cm, prefix + "_coefficients.csv")
    report.update({
        "lambda1": cm.lambda1,
        "lambda_g": cm.lambda_g,
        "converged": cm.converged,
        "iterations": cm.iterations,
        "kkt_residual": cm.kkt_residual,
        "objective_trace": [float(v) for v in cm.objective_trace],
        "factors": [asdict(f) for f in ml.salient_report(cm)],
    })
    _dump(report, prefix + "_report.json")
    for f in ml.salient_report(cm):
        if f.category != "none":
            print(f"{f.name}: {f.category} influential ({f.signs})")
    return 0


# ----------------------------------------------------------------- generate


def _dccsbm_from_json(cfg: dict, seed):
    cfg = dict(cfg)
    cfg.pop("model", None)
    expo = cfg.pop("theta_exponent", None)
    if seed is not None:
        cfg["seed"] = seed
    if "mu" not in cfg and "d" in cfg:
        d = int(cfg.pop("d"))
        return gen.sparse_regime_params(
            int(cfg["n"]), d, cfg.get("gamma", 0.5), cfg.get("density", 1.0), cfg.get("mean_distance", 1.0),
            None, int(cfg.get("seed", 0)),
        ), expo
    cfg.pop("d", None)
    known = {f.name for f in fields(gen.DcCsbmParams)}
    extra = sorted(set(cfg) - known)
    if extra:
        raise CliError(f"unknown DC-CSBM keys: {', '.join(extra)}")
    return gen.DcCsbmParams(**cfg), expo


def cmd_generate(args) -> int:
    cfg = _read_json(args.params)
    model = cfg.get("model", "world")
    os.makedirs(args.out, exist_ok=True)
    manifest = {"model": model}
    if model == "world":
        raw = {k: v for k, v in cfg.items() if k != "model"}
        if args.seed is not None:
            raw["seed"] = args.seed
        try:
            params = gen.WorldParams(**raw)
        except TypeError as exc:
            raise CliError(f"bad world parameters: {exc}") from None
        if args.calibrate_gini is not None:
            cal = gen.calibrate_gini(params, args.calibrate_gini, tol=args.tol, full_output=True)
            params = cal.params
            manifest["calibration"] = {"target": args.calibrate_gini, "median_gini": cal.measured,
                                       "iterations": cal.iterations}
        g, x, y, theta = gen.sample_world(params, return_theta=True)
        manifest["params"] = params.to_dict()
    elif model in ("dc_csbm", "dccsbm"):
        params, expo = _dccsbm_from_json(cfg, args.seed)
        y0 = gen.assign_classes(params.n, params.seed)
        if expo is not None:
            params = replace(params, theta=gen.sample_theta_powerlaw(params.n, y0, expo, seed=params.seed))
        g, x, y = gen.sample_dc_csbm(params, labels=y0)
        theta = gen.class_theta(params, y)
        manifest["params"] = {"n": params.n, "mu": params.mu, "nu": params.nu, "p_intra": params.p_intra,
                              "q_inter": params.q_inter, "seed": params.seed, "theta_exponent": expo}
    else:
        raise CliError(f"unknown model {model!r}; use 'world' or 'dc_csbm'")
    if args.simple:
        g = g.simple()
    # JSON keeps isolated nodes; the TSV copy is for edge-list tools
    write_graph(g, os.path.join(args.out, "graph.json"))
    write_graph(g, os.path.join(args.out, "graph.tsv"))
    write_features(x, os.path.join(args.out, "features.csv"))
    write_labels(y, os.path.join(args.out, "labels.csv"))
    np.savetxt(os.path.join(args.out, "theta.csv"), theta, fmt="%.17g")
    pv = profile(g, x, y, dataset=os.path.basename(os.path.normpath(args.out)))
    manifest["simple"] = bool(args.simple)
    manifest["properties"] = pv.values
    manifest["flags"] = pv.flags
    _dump(manifest, os.path.join(args.out, "manifest.json"))
    return 0


# ----------------------------------------------------------------- convolve


def cmd_convolve(args) -> int:
    g = load_graph(args.graph, format=args.format, directed=args.directed)
    x = load_features(args.features, g)
    cf = sep.convolve(g, x)
    write_features(cf.values, args.out, node_ids=g.node_ids or None)
    return 0


# ----------------------------------------------------------------- separate


def cmd_separate(args) -> int:
    defaults = {f.name: f.default for f in fields(sep.SweepConfig)}
    defaults["d_grid"] = [16, 64, 256]
    flags = {"gamma": args.gamma, "density": args.density, "mean_distance": args.mean_distance,
             "alpha_c": args.alpha_c, "seeds": args.seeds, "seed": args.seed, "mode": args.mode,
             "control": True if args.control else None,
             "d_grid": list(args.d_grid) if args.d_grid else None}
    if args.theta_exponent is not None:
        flags["theta_exponent"] = None if args.theta_exponent <= 0 else args.theta_exponent
    cfg = _merge(defaults, _read_json(args.config), flags)
    d_grid = [int(d) for d in cfg.pop("d_grid")]
    if any(d < 2 for d in d_grid):
        raise CliError("every d must be at least 2")
    sweep_cfg = sep.SweepConfig(**cfg)
    result = sep.dimension_sweep(sweep_cfg, d_grid, n_jobs=args.threads)
    os.makedirs(args.out, exist_ok=True)
    result.to_csv(os.path.join(args.out, "sweep.csv"))
    write_line_chart(
        os.path.join(args.out, "sweep.svg"),
        {"median fraction": (d_grid, [result.medians[d] for d in d_grid])},
        "feature dimension d",
        "separable fraction on alpha-subgroup",
        "mid-point hyperplane separability",
    )
    _dump({**cfg, "d_grid": d_grid}, os.path.join(args.out, "resolved_config.json"))
    for d in d_grid:
        print(f"d={d}: median fraction {result.medians[d]:.4f}")
    return 0


# --------------------------------------------------------------- experiment


def cmd_experiment(args) -> int:
    cfg = _read_json(args.config)
    base_cfg = cfg.pop("base", {})
    defaults = {"variable": "gini_degree", "grid": [0.13, 0.3, 0.5, 0.7, 0.88], "seeds": 5,
                "split": [0.6, 0.2, 0.2], "master_seed": 0, "calibration_tol": 0.02, "alpha": 1.0,
                "epochs": 500, "step": 0.1, "l2": 1e-4, "raw": False}
    flags = {"variable": args.variable, "grid": list(args.grid) if args.grid else None, "seeds": args.seeds,
             "split": list(args.split) if args.split else None, "master_seed": args.seed,
             "raw": True if args.raw else None, "epochs": args.epochs}
    c = _merge(defaults, cfg, flags)
    base_flags = {"n": args.n}
    try:
        base = gen.WorldParams(**{**base_cfg, **{k: v for k, v in base_flags.items() if v is not None}})
    except TypeError as exc:
        raise CliError(f"bad base parameters: {exc}") from None
    spec = ex.ExperimentSpec(
        base, c["variable"], tuple(c["grid"]), int(c["seeds"]), tuple(c["split"]),
        ex.ClassifierConfig(int(c["epochs"]), float(c["step"]), float(c["l2"]), bool(c["raw"])),
        int(c["master_seed"]), float(c["calibration_tol"]), float(c["alpha"]),
    )
    result = ex.run_experiment(spec, n_jobs=args.threads)
    ex.write_trend(result, args.out, "raw features" if c["raw"] else "convolved")
    _dump({**c, "base": base.to_dict()}, os.path.join(args.out, "resolved_config.json"))
    for p in result.points:
        print(f"{p['grid_value']:g}: measured {p['measured']:.4f} accuracy {p['accuracy_mean']:.4f} "
              f"+/- {p['accuracy_sd']:.4f} [{p['status']}]")
    print(f"Spearman(accuracy, {ex.MEASURED[spec.variable]}) = {result.spearman:.4f}")
    return 0


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphmeta", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default ${ex.THREADS_ENV} or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("profile", help="compute the fifteen dataset properties")
    s.add_argument("graph")
    s.add_argument("--features")
    s.add_argument("--labels")
    s.add_argument("--format", choices=("edge-list-tsv", "json"))
    s.add_argument("--directed", action="store_true")
    s.add_argument("--dataset", help="row name (default: graph file stem)")
    s.add_argument("--out", help="output prefix for .csv and .json (default: dataset name)")
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("regress", help="sparse group lasso of performance on properties")
    s.add_argument("properties")
    s.add_argument("performance")
    s.add_argument("--lambda1", type=float)
    s.add_argument("--lambda-g", type=float)
    s.add_argument("--ratio", type=float, default=1.0, help="lambda_g / lambda1 on the path (default 1)")
    s.add_argument("--path", action="store_true", help="solve a regularization path instead of one point")
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--min-ratio", type=float, default=1e-4)
    s.add_argument("--cv", action="store_true", help="pick the path point by leave-one-out error")
    s.add_argument("--missing", choices=("drop", "impute"), default="drop")
    s.add_argument("--out", default="regression")
    s.set_defaults(func=cmd_regress)

    s = sub.add_parser("generate", help="sample a synthetic dataset")
    s.add_argument("params", help="JSON with generator parameters ('model': 'world' or 'dc_csbm')")
    s.add_argument("--calibrate-gini", type=float)
    s.add_argument("--tol", type=float, default=0.02)
    s.add_argument("--seed", type=int)
    s.add_argument("--simple", action="store_true", help="clamp edge multiplicities to 1")
    s.add_argument("--out", default="dataset")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("convolve", help="apply one mean-aggregation graph convolution")
    s.add_argument("graph")
    s.add_argument("features")
    s.add_argument("--format", choices=("edge-list-tsv", "json"))
    s.add_argument("--directed", action="store_true")
    s.add_argument("--out", default="convolved.csv")
    s.set_defaults(func=cmd_convolve)

    s = sub.add_parser("separate", help="mid-point hyperplane separability sweep over d")
    s.add_argument("--config")
    s.add_argument("--d-grid", type=_ints)
    s.add_argument("--gamma", type=float)
    s.add_argument("--density", type=float)
    s.add_argument("--mean-distance", type=float)
    s.add_argument("--theta-exponent", type=float, help="power-law exponent for theta; 0 means theta = 1")
    s.add_argument("--alpha-c", type=float)
    s.add_argument("--seeds", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=("theta", "degree"))
    s.add_argument("--control", action="store_true", help="p = q and mu = nu")
    s.add_argument("--out", default="separability")
    s.set_defaults(func=cmd_separate)

    s = sub.add_parser("experiment", help="controlled sweep with the convolution proxy classifier")
    s.add_argument("--config")
    s.add_argument("--variable", choices=ex.SWEEP_VARIABLES)
    s.add_argument("--grid", type=_floats)
    s.add_argument("--seeds", type=int)
    s.add_argument("--split", type=_floats)
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--n", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--raw", action="store_true", help="train on unconvolved features")
    s.add_argument("--out", default="experiment")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is None:
        args.threads = ex.default_threads()
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return args.func(args)
    except (CliError, GraphFormatError, FileNotFoundError, ValueError) as exc:
        print(f"graphmeta {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
