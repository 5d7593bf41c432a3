"""Controlled sweeps over generator parameters with a convolution + logistic-regression proxy."""

from __future__ import annotations

import csv
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import spearmanr

from .generator import WorldParams, calibrate_gini, sample_world
from .properties import average_degree, edge_homogeneity, feature_similarities, gini_degree
from .separability import alpha_subgroup, convolve
from .svgchart import write_line_chart

logger = logging.getLogger(__name__)

THREADS_ENV = "GRAPHMETA_THREADS"
SWEEP_VARIABLES = ("gini_degree", "average_degree", "edge_homogeneity", "feature_cluster_variance")
# the property each sweep is scored against
MEASURED = {
    "gini_degree": "gini_degree",
    "average_degree": "average_degree",
    "edge_homogeneity": "edge_homogeneity",
    "feature_cluster_variance": "in_feature_similarity",
}


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- classifier


@dataclass(frozen=True)
class ClassifierConfig:
    epochs: int = 500
    step: float = 0.1
    l2: float = 1e-4
    raw: bool = False


def split_indices(n: int, seed: int, ratios=(0.6, 0.2, 0.2)):
    """Seeded train/validation/test partition of ``range(n)``."""
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1) > 1e-9:
        raise ValueError("split ratios must be three non-negative numbers summing to 1")
    perm = np.random.default_rng(np.random.SeedSequence([seed, 11])).permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def fit_logistic(x, y, n_classes: int, cfg: ClassifierConfig = ClassifierConfig()):
    """Multinomial logistic regression by full-batch gradient descent from zero.

    Returns ``(W, b)``; the loss is mean cross-entropy plus
    ``l2 / 2 * ||W||^2``.
    """
    n, d = x.shape
    w = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y]
    for _ in range(cfg.epochs):
        z = x @ w + b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / n
        w -= cfg.step * (x.T @ g + cfg.l2 * w)
        b -= cfg.step * g.sum(axis=0)
    return w, b


def train_proxy_classifier(cf, labels, split, config: ClassifierConfig = ClassifierConfig(), raw_features=None) -> float:
    """Test accuracy of logistic regression on convolved (or raw) features.

    ``cf`` is a :class:`ConvolvedFeatures` or a plain matrix; with
    ``config.raw`` the matrix in ``raw_features`` is used instead.  Features
    are standardised with training-split statistics.
    """
    y = np.asarray(labels, dtype=np.int64)
    if config.raw:
        if raw_features is None:
            raise ValueError("raw mode needs the unconvolved features")
        x = np.asarray(raw_features, dtype=float)
    else:
        x = cf.values if hasattr(cf, "values") else np.asarray(cf, dtype=float)
    train, _, test = split
    if len(train) == 0 or len(test) == 0:
        raise ValueError("degenerate split: empty train or test set")
    classes = np.unique(y[train])
    if classes.size < 2:
        raise ValueError("degenerate split: fewer than two classes in the training set")
    mean = x[train].mean(axis=0)
    sd = x[train].std(axis=0)
    sd[sd == 0] = 1.0
    xs = (x - mean) / sd
    n_classes = int(y.max()) + 1
    w, b = fit_logistic(xs[train], y[train], n_classes, config)
    pred = np.argmax(xs[test] @ w + b, axis=1)
    return float(np.mean(pred == y[test]))


# ---------------------------------------------------------------- experiment


@dataclass(frozen=True)
class ExperimentSpec:
    base: WorldParams
    variable: str
    grid: tuple
    seeds: int = 5
    split: tuple = (0.6, 0.2, 0.2)
    classifier: ClassifierConfig = ClassifierConfig()
    master_seed: int = 0
    calibration_tol: float = 0.02
    # degree-mode alpha for the subgroup-size diagnostic
    alpha: float = 1.0

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}")
        if abs(sum(self.split) - 1) > 1e-9:
            raise ValueError("split ratios must sum to 1")
        if self.seeds < 1 or not self.grid:
            raise ValueError("need at least one seed and one grid value")
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))


@dataclass
class TrendResult:
    spec: ExperimentSpec
    cells: list
    points: list
    spearman: float
    failures: dict = field(default_factory=dict)


CELL_COLUMNS = ("point", "grid_value", "seed", "n", "m", "measured", "accuracy", "subgroup_size", "power_exponent")
POINT_COLUMNS = ("point", "grid_value", "measured", "accuracy_mean", "accuracy_sd", "subgroup_size_median", "status")


def cell_seed(master: int, point: int, k: int) -> int:
    return int(np.random.SeedSequence([master, point, k]).generate_state(1, dtype=np.uint64)[0] >> 1)


def point_params(spec: ExperimentSpec, i: int, value: float) -> WorldParams:
    """Generator parameters for grid point ``i`` (calibrating when sweeping Gini)."""
    base = replace(spec.base, seed=cell_seed(spec.master_seed, i, 10**6))
    if spec.variable == "gini_degree":
        return calibrate_gini(base, value, tol=spec.calibration_tol)
    if spec.variable == "average_degree":
        return replace(base, average_degree=value)
    if spec.variable == "edge_homogeneity":
        return replace(base, p_to_q_ratio=value)
    return replace(base, feature_cluster_variance=value)


def measure(variable: str, g, x, y) -> float:
    name = MEASURED[variable]
    if name == "gini_degree":
        return gini_degree(g)
    if name == "average_degree":
        return average_degree(g)
    if name == "edge_homogeneity":
        return edge_homogeneity(g, y)
    return feature_similarities(g, x, y)[0]


def run_cell(spec: ExperimentSpec, i: int, params: WorldParams, k: int) -> dict:
    seed = cell_seed(spec.master_seed, i, k)
    p = replace(params, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        g, x, y = sample_world(p)
    cf = convolve(g, x)
    split = split_indices(g.n, seed, spec.split)
    acc = train_proxy_classifier(cf, y, split, spec.classifier, raw_features=x)
    sub = alpha_subgroup(y, cf.augmented_degrees, spec.alpha, mode="degree",
                         threshold=1 + p.average_degree * spec.alpha)
    return {
        "point": i,
        "grid_value": spec.grid[i],
        "seed": seed,
        "n": g.n,
        "m": g.m,
        "measured": measure(spec.variable, g, x, y),
        "accuracy": acc,
        "subgroup_size": sub.size,
        "power_exponent": p.power_exponent,
    }


def spearman(a, b) -> float:
    """Spearman rank correlation (average ranks for ties); NaN when a side is constant."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size < 2 or np.all(a == a[0]) or np.all(b == b[0]):
        return float("nan")
    return float(spearmanr(a, b).statistic)


def run_experiment(spec: ExperimentSpec, n_jobs: int | None = None) -> TrendResult:
    """Generate, convolve and classify at every grid point and seed.

    Points whose generation fails are kept with a failure note and left
    out of the correlation.
    """
    n_jobs = default_threads() if n_jobs is None else n_jobs
    failures, params = {}, {}
    for i, value in enumerate(spec.grid):
        try:
            params[i] = point_params(spec, i, value)
        except (ValueError, FloatingPointError) as exc:
            failures[i] = str(exc)
            logger.warning("grid point %d (%s) failed: %s", i, value, exc)
    jobs = [(i, params[i], k) for i in sorted(params) for k in range(spec.seeds)]
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            cells = list(pool.map(lambda a: run_cell(spec, *a), jobs))
    else:
        cells = [run_cell(spec, *a) for a in jobs]
    cells.sort(key=lambda c: (c["point"], c["seed"]))
    points = []
    for i, value in enumerate(spec.grid):
        rows = [c for c in cells if c["point"] == i]
        if not rows:
            points.append({"point": i, "grid_value": value, "measured": math.nan, "accuracy_mean": math.nan,
                           "accuracy_sd": math.nan, "subgroup_size_median": math.nan,
                           "status": "failed: " + failures.get(i, "no cells")})
            continue
        acc = np.array([c["accuracy"] for c in rows])
        points.append({
            "point": i,
            "grid_value": value,
            "measured": float(np.mean([c["measured"] for c in rows])),
            "accuracy_mean": float(acc.mean()),
            "accuracy_sd": float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
            "subgroup_size_median": float(np.median([c["subgroup_size"] for c in rows])),
            "status": "ok",
        })
    ok = [p for p in points if p["status"] == "ok"]
    rho = spearman([p["accuracy_mean"] for p in ok], [p["measured"] for p in ok])
    return TrendResult(spec, cells, points, rho, failures)


def _cell(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def write_rows(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def write_trend(result: TrendResult, out_dir, label: str = "proxy") -> dict:
    """Write cells.csv, points.csv, summary.csv and trend.svg into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, f) for k, f in
             (("cells", "cells.csv"), ("points", "points.csv"), ("summary", "summary.csv"), ("chart", "trend.svg"))}
    write_rows(paths["cells"], result.cells, CELL_COLUMNS)
    write_rows(paths["points"], result.points, POINT_COLUMNS)
    write_rows(paths["summary"], [{"variable": result.spec.variable, "measured_property": MEASURED[result.spec.variable],
                                   "spearman": result.spearman, "failed_points": len(result.failures)}],
               ("variable", "measured_property", "spearman", "failed_points"))
    ok = [p for p in result.points if p["status"] == "ok"]
    write_line_chart(
        paths["chart"],
        {label: ([p["measured"] for p in ok], [p["accuracy_mean"] for p in ok])},
        MEASURED[result.spec.variable],
        "mean test accuracy",
        f"accuracy vs {MEASURED[result.spec.variable]} (Spearman {result.spearman:.3f})",
    )
    return paths
