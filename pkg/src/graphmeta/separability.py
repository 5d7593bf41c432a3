"""Single-layer graph convolution and linear-separability checks on alpha-subgroups."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .generator import DcCsbmParams, class_theta, sparse_regime_params, sample_dc_csbm, sample_theta_powerlaw, assign_classes
from .graph import Graph, degree_vector

DEFAULT_CAP = 2000
MARGIN = 1e-9


@dataclass(frozen=True)
class ConvolvedFeatures:
    """Rows of ``D^-1 (A + I) X`` and the augmented degrees ``D``."""

    values: np.ndarray
    augmented_degrees: np.ndarray


def convolve(g: Graph, x) -> ConvolvedFeatures:
    """Replace every row by the multiplicity-weighted mean over its neighbors and itself.

    Directed graphs average over out-neighbors.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != g.n:
        raise ValueError(f"features have {x.shape[0]} rows for {g.n} nodes")
    a = g.adj.astype(float)
    deg = np.asarray(g.adj.sum(axis=1)).ravel().astype(np.int64) + 1
    values = (a @ x + x) / deg[:, None]
    return ConvolvedFeatures(values, deg)


@dataclass(frozen=True)
class AlphaSubgroup:
    """Thresholded nodes split by class.

    ``rest`` holds qualifying nodes of classes beyond 0 and 1; it is empty
    for two-class data and ignored by the separability checks.
    """

    alpha: float
    c0: np.ndarray
    c1: np.ndarray
    mode: str
    rest: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def members(self) -> np.ndarray:
        return np.sort(np.concatenate([self.c0, self.c1, self.rest]))

    @property
    def size(self) -> int:
        return self.c0.size + self.c1.size + self.rest.size


def degree_threshold(n: int, alpha: float, p_intra: float, q_inter: float, asymptotic: bool = False) -> float:
    """Augmented-degree cut matching theta >= alpha.

    The default is the expectation ``1 + (n-1)/2 (p+q) alpha``; with
    ``asymptotic`` the cruder ``n (p+q) alpha`` is returned.
    """
    if asymptotic:
        return n * (p_intra + q_inter) * alpha
    return 1 + (n - 1) / 2 * (p_intra + q_inter) * alpha


def alpha_subgroup(labels, theta_or_degrees, alpha, p_intra=None, q_inter=None, mode="theta", threshold=None) -> AlphaSubgroup:
    """Nodes of class 0 and class 1 whose theta (or augmented degree) clears ``alpha``.

    In ``degree`` mode the cut is :func:`degree_threshold` unless an
    explicit ``threshold`` is given.
    """
    labels = np.asarray(labels)
    vals = np.asarray(theta_or_degrees, dtype=float)
    if vals.shape != labels.shape:
        raise ValueError("labels and theta/degrees must have the same length")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if mode == "theta":
        cut = alpha
    elif mode == "degree":
        if threshold is None:
            if p_intra is None or q_inter is None:
                raise ValueError("degree mode needs p_intra and q_inter or an explicit threshold")
            threshold = degree_threshold(labels.size, alpha, p_intra, q_inter)
        cut = threshold
    else:
        raise ValueError(f"unknown mode {mode!r}")
    keep = vals >= cut
    return AlphaSubgroup(
        float(alpha),
        np.flatnonzero(keep & (labels == 0)),
        np.flatnonzero(keep & (labels == 1)),
        mode,
        np.flatnonzero(keep & (labels > 1)),
    )


def midpoint_hyperplane(mu, nu):
    """Unit normal pointing from mu to nu and offset through their midpoint."""
    mu, nu = np.asarray(mu, dtype=float), np.asarray(nu, dtype=float)
    diff = nu - mu
    norm = np.linalg.norm(diff)
    if norm == 0:
        raise ValueError("mu equals nu: the mid-point hyperplane is undefined")
    v = diff / norm
    return v, -float(np.dot(mu + nu, v)) / 2


def _scores(cf, idx, v, b):
    vals = cf.values if isinstance(cf, ConvolvedFeatures) else np.asarray(cf, dtype=float)
    return vals[idx] @ np.asarray(v, dtype=float) + b


def separability_fraction(cf, sub: AlphaSubgroup, v, b) -> float:
    """Share of subgroup nodes strictly on their own side (class 0 negative, class 1 positive).

    NaN for an empty subgroup.
    """
    total = sub.c0.size + sub.c1.size
    if total == 0:
        return float("nan")
    good = np.count_nonzero(_scores(cf, sub.c0, v, b) < 0) + np.count_nonzero(_scores(cf, sub.c1, v, b) > 0)
    return good / total


@dataclass
class SeparabilityResult:
    separable: bool
    v: np.ndarray | None = None
    b: float | None = None
    margin: float | None = None
    # convex weights on each class with equal combinations when not separable
    certificate: tuple | None = None


def exact_separability(cf, sub: AlphaSubgroup, cap: int = DEFAULT_CAP, margin: float = MARGIN) -> SeparabilityResult:
    """Decide whether some hyperplane strictly separates the two classes of ``sub``.

    Solves a bounded margin-maximisation LP over ``(v, b, t)`` with
    ``-1 <= v_k <= 1``.  A positive optimum above ``margin`` yields a
    witness.  Otherwise the convex hulls of the two classes intersect and
    the returned certificate holds convex weights ``(l0, l1)`` with
    ``X0^T l0 = X1^T l1``.
    """
    if sub.c0.size + sub.c1.size > cap:
        raise ValueError(
            f"subgroup has {sub.size} nodes, above the cap of {cap}; use separability_fraction instead"
        )
    vals = cf.values if isinstance(cf, ConvolvedFeatures) else np.asarray(cf, dtype=float)
    x0, x1 = vals[sub.c0], vals[sub.c1]
    if x0.shape[0] == 0 or x1.shape[0] == 0:
        d = vals.shape[1]
        v = np.zeros(d)
        v[0] = 1.0
        pts = x0 if x0.shape[0] else x1
        if pts.shape[0] == 0:
            return SeparabilityResult(True, v, 0.0, float("inf"))
        proj = pts @ v
        b = -(proj.max() + 1.0) if x0.shape[0] else -(proj.min() - 1.0)
        return SeparabilityResult(True, v, float(b), 1.0)
    d = vals.shape[1]
    # variables (v, b, t); maximise t subject to -(x0 v + b) >= t and x1 v + b >= t
    c = np.zeros(d + 2)
    c[-1] = -1.0
    a_ub = np.block([
        [x0, np.ones((x0.shape[0], 1)), np.ones((x0.shape[0], 1))],
        [-x1, -np.ones((x1.shape[0], 1)), np.ones((x1.shape[0], 1))],
    ])
    b_ub = np.zeros(a_ub.shape[0])
    bounds = [(-1, 1)] * d + [(None, None), (None, 1)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 0 and -res.fun > margin:
        v, b = res.x[:d], res.x[d]
        norm = np.linalg.norm(v)
        return SeparabilityResult(True, v / norm, float(b / norm), float(-res.fun / norm))
    # hull intersection: l0, l1 >= 0, sum = 1, X0^T l0 - X1^T l1 = 0
    n0, n1 = x0.shape[0], x1.shape[0]
    a_eq = np.vstack([
        np.hstack([x0.T, -x1.T]),
        np.hstack([np.ones((1, n0)), np.zeros((1, n1))]),
        np.hstack([np.zeros((1, n0)), np.ones((1, n1))]),
    ])
    b_eq = np.concatenate([np.zeros(d), [1.0, 1.0]])
    cert = linprog(np.zeros(n0 + n1), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * (n0 + n1), method="highs")
    certificate = (cert.x[:n0], cert.x[n0:]) if cert.status == 0 else None
    return SeparabilityResult(False, certificate=certificate)


# ---------------------------------------------------------------- diagnostics


@dataclass
class ConcentrationReport:
    """Per-node concentration checks on the alpha-subgroup.

    ``class_size_ok`` says whether both classes lie in ``n/2 (1 +/- delta)``.
    ``degree_violation`` is the share of subgroup nodes whose ``D_ii / n``
    leaves ``(p+q) theta_i / 2 (1 +/- delta_prime)``.  ``fraction_violation``
    is the share whose same-class (or other-class) neighbour fraction leaves
    ``p/(p+q) (1 +/- delta_prime)`` (or ``q/(p+q) (1 +/- delta_prime)``).
    """

    size: int
    delta: float
    delta_prime: float
    class_size_ok: bool
    degree_violation: float
    fraction_violation: float
    intra_fraction_mean: float
    inter_fraction_mean: float
    degree_deviation: np.ndarray = field(repr=False, default=None)


def concentration_report(
    g: Graph, labels, theta, p_intra, q_inter, alpha, eps: float = 0.05, delta_prime: float | None = None
) -> ConcentrationReport:
    """Empirical violation rates of the class-size, degree and neighbourhood events.

    ``D`` is the augmented degree and neighbour counts include the node
    itself.  ``delta_prime`` fixes the relative band instead of deriving it
    from ``alpha``, which makes rates comparable across alphas.  An empty
    subgroup gives NaN rates.
    """
    labels = np.asarray(labels)
    theta = np.asarray(theta, dtype=float)
    n = g.n
    sub = alpha_subgroup(labels, theta, alpha, mode="theta")
    delta = n ** (-0.5 + eps)
    if delta_prime is None:
        delta_prime = (alpha * math.log(n)) ** (-0.5 + eps) if n > 1 else float("inf")
    sizes = np.bincount(labels, minlength=2)[:2]
    class_ok = bool(np.all(np.abs(sizes - n / 2) <= delta * n / 2))
    if sub.size == 0:
        nan = float("nan")
        return ConcentrationReport(0, delta, delta_prime, class_ok, nan, nan, nan, nan, np.zeros(0))
    idx = sub.members
    deg = degree_vector(g, augmented=True).astype(float)
    expected = (p_intra + q_inter) * theta[idx] / 2
    dev = np.abs(deg[idx] / n - expected) / expected
    a = sp.csr_matrix(g.adj, dtype=float) + sp.identity(n, format="csr")
    onehot = (labels[:, None] == np.array([0, 1])[None, :]).astype(float)
    counts = a[idx] @ onehot
    intra = counts[np.arange(idx.size), labels[idx]] / deg[idx]
    inter = 1 - intra
    t_intra = p_intra / (p_intra + q_inter)
    t_inter = 1 - t_intra
    bad = (np.abs(intra - t_intra) > delta_prime * t_intra) | (np.abs(inter - t_inter) > delta_prime * t_inter)
    return ConcentrationReport(
        int(idx.size),
        delta,
        delta_prime,
        class_ok,
        float(np.mean(dev > delta_prime)),
        float(np.mean(bad)),
        float(intra.mean()),
        float(inter.mean()),
        dev,
    )


# ---------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepConfig:
    """Settings for the dimension sweep.

    ``n`` follows ``round(d log^2 d)`` unless ``n_rule`` overrides it, and
    ``alpha`` defaults to ``alpha_c / log n``.
    """

    gamma: float = 0.5
    density: float = 1.0
    mean_distance: float = 1.0
    theta_exponent: float | None = 2.5
    alpha_c: float = 2.0
    seeds: int = 20
    seed: int = 0
    mode: str = "theta"
    control: bool = False

    def n_for(self, d: int) -> int:
        return int(round(d * math.log(d) ** 2))

    def alpha_for(self, n: int) -> float:
        return self.alpha_c / math.log(n)


SWEEP_COLUMNS = ("d", "n", "alpha", "seed", "subgroup_size", "fraction", "degree_violation", "fraction_violation")


def _cell_seed(master, d, k):
    return int(np.random.SeedSequence([master, d, k]).generate_state(1, dtype=np.uint64)[0] >> 1)


def sweep_cell(cfg: SweepConfig, d: int, k: int) -> dict:
    """One seed at one dimension: sample, convolve, score the mid-point hyperplane."""
    n = cfg.n_for(d)
    alpha = cfg.alpha_for(n)
    seed = _cell_seed(cfg.seed, d, k)
    gamma = 0.0 if cfg.control else cfg.gamma
    labels = assign_classes(n, seed)
    theta = None
    if cfg.theta_exponent is not None:
        theta = sample_theta_powerlaw(n, labels, cfg.theta_exponent, seed=seed)
    params = sparse_regime_params(n, d, gamma, cfg.density, cfg.mean_distance, theta, seed)
    if cfg.control:
        params = DcCsbmParams(n, params.mu * 0, params.nu * 0, params.p_intra, params.q_inter, theta, seed)
    g, x, y = sample_dc_csbm(params, labels=labels)
    th = class_theta(params, y)
    cf = convolve(g, x)
    # the control has mu = nu, so it is scored with the hyperplane of the signal run
    ref = sparse_regime_params(n, d, cfg.gamma, cfg.density, cfg.mean_distance)
    v, b = midpoint_hyperplane(ref.mu, ref.nu)
    if cfg.mode == "theta":
        sub = alpha_subgroup(y, th, alpha, mode="theta")
    else:
        sub = alpha_subgroup(y, cf.augmented_degrees, alpha, params.p_intra, params.q_inter, mode="degree")
    rep = concentration_report(g, y, th, params.p_intra, params.q_inter, alpha)
    return {
        "d": d,
        "n": n,
        "alpha": alpha,
        "seed": seed,
        "subgroup_size": sub.size,
        "fraction": separability_fraction(cf, sub, v, b),
        "degree_violation": rep.degree_violation,
        "fraction_violation": rep.fraction_violation,
    }


@dataclass
class SweepResult:
    rows: list
    medians: dict
    non_decreasing: bool

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(float(r[k])) if isinstance(r[k], float) else r[k]) for k in SWEEP_COLUMNS})


def dimension_sweep(base: SweepConfig | None = None, d_grid=(16, 64, 256), alpha_rule=None, n_jobs: int = 1) -> SweepResult:
    """Separability fraction of the mid-point hyperplane across feature dimensions.

    ``alpha_rule(n)`` overrides the default ``alpha_c / log n``.
    """
    cfg = base or SweepConfig()
    if alpha_rule is not None:
        cfg = _AlphaOverride(cfg, alpha_rule)
    cells = [(d, k) for d in d_grid for k in range(cfg.seeds)]
    if n_jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(n_jobs) as pool:
            rows = list(pool.map(lambda c: sweep_cell(cfg, *c), cells))
    else:
        rows = [sweep_cell(cfg, d, k) for d, k in cells]
    medians = {d: float(np.nanmedian([r["fraction"] for r in rows if r["d"] == d])) for d in d_grid}
    meds = [medians[d] for d in d_grid]
    return SweepResult(rows, medians, bool(all(b >= a for a, b in zip(meds, meds[1:]))))


class _AlphaOverride:
    """SweepConfig proxy with a custom alpha rule."""

    def __init__(self, cfg, rule):
        self._cfg, self._rule = cfg, rule

    def __getattr__(self, name):
        return getattr(self._cfg, name)

    def alpha_for(self, n):
        return float(self._rule(n))
