"""Degree-corrected contextual SBM sampling and a GraphWorld-style k-cluster variant.

Edges are Poisson with intensity ``theta_i * theta_j * B[c_i, c_j]``.  Rather
than visiting all n^2 pairs, each block pair draws its total edge count from
a Poisson with the summed intensity and then places endpoints with
probability proportional to theta inside the blocks.  Within a block, draws
are made over ordered pairs and self-pairs are discarded, which leaves every
unordered pair {i, j} with exactly Poisson(theta_i theta_j B) edges.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import Graph
from .properties import gini_degree

logger = logging.getLogger(__name__)

SPARSE_REGIME_LIMIT = 30.0


def _rng(seed, *stream):
    """Generator for a named sub-stream of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *stream]))


_LABELS, _THETA, _EDGES, _FEATURES, _SHUFFLE = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class DcCsbmParams:
    """Two-class DC-CSBM parameters.

    ``theta=None`` means every node has degree correction 1.  A supplied
    theta is renormalized per class after the classes are drawn.
    """

    n: int
    mu: np.ndarray
    nu: np.ndarray
    p_intra: float
    q_inter: float
    theta: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        mu, nu = np.asarray(self.mu, dtype=float).ravel(), np.asarray(self.nu, dtype=float).ravel()
        if mu.shape != nu.shape:
            raise ValueError("mu and nu must have the same dimension")
        if np.linalg.norm(mu) > 1 + 1e-12 or np.linalg.norm(nu) > 1 + 1e-12:
            raise ValueError("class means must have norm at most 1")
        if not (self.p_intra > 0 and self.q_inter > 0):
            raise ValueError("edge intensities must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        if self.theta is not None:
            theta = np.asarray(self.theta, dtype=float)
            if theta.shape != (self.n,) or (theta <= 0).any() or (theta > self.n).any():
                raise ValueError("theta must be an n-vector with entries in (0, n]")
            object.__setattr__(self, "theta", theta)

    @property
    def d(self) -> int:
        return self.mu.size

    @property
    def gamma(self) -> float:
        """Block signal strength (p - q) / (p + q)."""
        return (self.p_intra - self.q_inter) / (self.p_intra + self.q_inter)


@dataclass(frozen=True)
class WorldParams:
    n: int = 5000
    average_degree: float = 30.0
    num_clusters: int = 4
    cluster_size_slope: float = 0.5
    p_to_q_ratio: float = 4.0
    feature_dim: int = 16
    feature_center_distance: float = 0.5
    feature_cluster_variance: float = 0.05
    power_exponent: float = 2.0
    seed: int = 0
    theta_max: float | None = None

    def __post_init__(self):
        if self.num_clusters < 2:
            raise ValueError("num_clusters must be at least 2")
        if self.power_exponent <= 1:
            raise ValueError("power_exponent must exceed 1")
        for name in ("n", "average_degree", "p_to_q_ratio", "feature_dim",
                     "feature_center_distance", "feature_cluster_variance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.cluster_size_slope < 0:
            raise ValueError("cluster_size_slope must be non-negative")
        if self.feature_dim < self.num_clusters:
            raise ValueError("feature_dim must be at least num_clusters to place the centers")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ------------------------------------------------------------------ classes


def assign_classes(n: int, seed: int) -> np.ndarray:
    """i.i.d. Bernoulli(1/2) class labels."""
    return _rng(seed, _LABELS).integers(0, 2, size=n).astype(np.int64)


def cluster_sizes(n: int, k: int, slope: float) -> np.ndarray:
    """Sizes proportional to ``1 + slope * i`` (i = 0..k-1), rounded to sum to n."""
    w = 1.0 + slope * np.arange(k)
    raw = n * w / w.sum()
    sizes = np.floor(raw).astype(np.int64)
    short = n - sizes.sum()
    order = np.lexsort((np.arange(k), -(raw - sizes)))
    sizes[order[:short]] += 1
    return sizes


def normalize_theta(theta, labels, theta_max: float, max_tries: int = 100) -> np.ndarray:
    """Rescale theta so each class sums to its size, keeping every entry <= theta_max.

    Entries pushed above ``theta_max`` are pinned there and the remainder of
    the class is rescaled again, up to ``max_tries`` rounds.
    """
    theta = np.minimum(np.asarray(theta, dtype=float), theta_max)
    labels = np.asarray(labels)
    out = np.empty_like(theta)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        t = theta[idx].copy()
        target = float(idx.size)
        pinned = np.zeros(idx.size, dtype=bool)
        for _ in range(max_tries):
            free_target = target - theta_max * pinned.sum()
            free_sum = t[~pinned].sum()
            if free_target <= 0 or free_sum <= 0:
                raise ValueError("cannot renormalize theta under theta_max")
            t[~pinned] *= free_target / free_sum
            over = (~pinned) & (t > theta_max)
            if not over.any():
                break
            pinned |= over
            t[pinned] = theta_max
        else:
            raise ValueError(f"theta renormalization did not settle in {max_tries} rounds")
        out[idx] = t
    return out


def sample_theta_powerlaw(n: int, labels, exponent: float, theta_max: float | None = None, seed: int = 0) -> np.ndarray:
    """Power-law degree corrections renormalized per class.

    Raw values follow the density ``x^-exponent`` on ``[1, inf)`` (a Pareto
    with shape ``exponent - 1``), are clamped to ``theta_max`` (default n)
    and rescaled so each class sums to its size.
    """
    if exponent <= 1:
        raise ValueError("power-law exponent must exceed 1")
    theta_max = float(n) if theta_max is None else float(theta_max)
    rng = _rng(seed, _THETA)
    u = rng.random(n)
    with np.errstate(over="ignore"):
        raw = (1.0 - u) ** (-1.0 / (exponent - 1.0))
    raw = np.minimum(raw, theta_max)
    return normalize_theta(raw, labels, theta_max)


# -------------------------------------------------------------------- edges


def _draw(rng, cum, count):
    """``count`` indices drawn proportionally to the weights behind ``cum``."""
    return np.searchsorted(cum, rng.random(count) * cum[-1], side="right")


def sample_block_edges(rng, theta, blocks, intensity) -> np.ndarray:
    """Poisson multigraph edges for block intensity matrix ``intensity``.

    Returns an (m, 2) array with one row per unit of multiplicity.
    """
    theta = np.asarray(theta, dtype=float)
    k = intensity.shape[0]
    members = [np.flatnonzero(blocks == b) for b in range(k)]
    cums = [np.cumsum(theta[idx]) for idx in members]
    sums = [c[-1] if c.size else 0.0 for c in cums]
    tops = [theta[idx].max() if idx.size else 0.0 for idx in members]
    hot = max(tops[a] * tops[b] * intensity[a, b] for a in range(k) for b in range(k))
    if hot > SPARSE_REGIME_LIMIT:
        warnings.warn(
            f"largest pair intensity {hot:.1f} exceeds {SPARSE_REGIME_LIMIT}: outside the sparse regime",
            RuntimeWarning,
            stacklevel=3,
        )
    chunks = []
    for a in range(k):
        for b in range(a, k):
            if not members[a].size or not members[b].size:
                continue
            if a == b:
                lam = intensity[a, a] * sums[a] ** 2 / 2
            else:
                lam = intensity[a, b] * sums[a] * sums[b]
            count = rng.poisson(lam)
            i = members[a][_draw(rng, cums[a], count)]
            j = members[b][_draw(rng, cums[b], count)]
            if a == b:
                keep = i != j
                i, j = i[keep], j[keep]
            chunks.append(np.column_stack([i, j]))
    return np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)


def expected_degree(theta, labels, p_intra, q_inter) -> np.ndarray:
    """Exact E[deg_i] given classes: ``theta_i (p (S_c - theta_i) + q S_other)``."""
    theta = np.asarray(theta, dtype=float)
    labels = np.asarray(labels)
    s = np.array([theta[labels == 0].sum(), theta[labels == 1].sum()])
    return theta * (p_intra * (s[labels] - theta) + q_inter * s[1 - labels])


def augmented_degree_mean(n, theta, p_intra, q_inter):
    """Mean of the self-loop-augmented degree, ``1 + (n - 1)/2 (p + q) theta``."""
    return 1.0 + (n - 1) / 2 * (p_intra + q_inter) * np.asarray(theta, dtype=float)


def sample_dc_csbm(params: DcCsbmParams, labels=None):
    """Draw ``(graph, features, labels)`` from a two-class DC-CSBM.

    ``labels`` may be supplied to condition on a fixed class assignment.
    """
    n = params.n
    y = assign_classes(n, params.seed) if labels is None else np.asarray(labels, dtype=np.int64)
    theta = np.ones(n) if params.theta is None else normalize_theta(params.theta, y, float(n))
    intensity = np.array([[params.p_intra, params.q_inter], [params.q_inter, params.p_intra]])
    edges = sample_block_edges(_rng(params.seed, _EDGES), theta, y, intensity)
    g = Graph.from_edges(n, edges)
    rng = _rng(params.seed, _FEATURES)
    means = np.where(y[:, None] == 0, params.mu[None, :], params.nu[None, :])
    x = means + rng.standard_normal((n, params.d)) / math.sqrt(params.d)
    return g, x, y


def class_theta(params: DcCsbmParams, labels) -> np.ndarray:
    """The renormalized theta actually used by :func:`sample_dc_csbm`."""
    if params.theta is None:
        return np.ones(params.n)
    return normalize_theta(params.theta, labels, float(params.n))


def sparse_regime_params(
    n: int,
    d: int,
    gamma: float = 0.5,
    density: float = 1.0,
    mean_distance: float = 1.0,
    theta=None,
    seed: int = 0,
) -> DcCsbmParams:
    """Parameters with ``p + q = density * log(n)^3 / n`` and fixed (p - q)/(p + q).

    The class means sit at ``-/+ mean_distance / 2`` along the all-ones
    direction, so ``||mu - nu|| = mean_distance``.
    """
    total = min(density * math.log(n) ** 3 / n, 1.0)
    p, q = total * (1 + gamma) / 2, total * (1 - gamma) / 2
    u = np.ones(d) / math.sqrt(d)
    return DcCsbmParams(n, -mean_distance / 2 * u, mean_distance / 2 * u, p, max(q, 1e-300), theta, seed)


# -------------------------------------------------------------------- world


def simplex_centers(k: int, d: int, distance: float) -> np.ndarray:
    """``k`` centered points in R^d with all pairwise distances equal to ``distance``."""
    e = np.eye(k, d)
    e -= e.mean(axis=0)
    return e * (distance / math.sqrt(2.0))


def world_intensity(params: WorldParams, theta, labels) -> np.ndarray:
    """Block intensity matrix hitting ``average_degree`` in expectation."""
    k = params.num_clusters
    s = np.bincount(labels, weights=theta, minlength=k)
    s2 = np.bincount(labels, weights=theta**2, minlength=k)
    ratio = params.p_to_q_ratio
    intra = (s**2 - s2).sum()
    inter = s.sum() ** 2 - (s**2).sum()
    q = params.average_degree * params.n / (ratio * intra + inter)
    intensity = np.full((k, k), q)
    np.fill_diagonal(intensity, ratio * q)
    return intensity


def world_labels(params: WorldParams) -> np.ndarray:
    sizes = cluster_sizes(params.n, params.num_clusters, params.cluster_size_slope)
    y = np.repeat(np.arange(params.num_clusters), sizes)
    return _rng(params.seed, _SHUFFLE).permutation(y).astype(np.int64)


def sample_world(params: WorldParams, return_theta: bool = False):
    """k-cluster degree-corrected SBM with Gaussian cluster features.

    Returns ``(graph, features, labels)`` (plus theta when requested).
    """
    if params.average_degree >= params.n:
        raise ValueError("average_degree must be below n")
    y = world_labels(params)
    theta_max = float(params.n) if params.theta_max is None else params.theta_max
    theta = sample_theta_powerlaw(params.n, y, params.power_exponent, theta_max, params.seed)
    intensity = world_intensity(params, theta, y)
    edges = sample_block_edges(_rng(params.seed, _EDGES), theta, y, intensity)
    g = Graph.from_edges(params.n, edges)
    centers = simplex_centers(params.num_clusters, params.feature_dim, params.feature_center_distance)
    noise = _rng(params.seed, _FEATURES).standard_normal((params.n, params.feature_dim))
    x = centers[y] + math.sqrt(params.feature_cluster_variance) * noise
    if return_theta:
        return g, x, y, theta
    return g, x, y


# -------------------------------------------------------------- calibration


@dataclass
class Calibration:
    params: WorldParams
    measured: float
    iterations: int
    history: list = field(default_factory=list)


def measure_gini(params: WorldParams, seeds: int = 5) -> float:
    """Median Gini-Degree over ``seeds`` calibration draws derived from ``params.seed``."""
    vals = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(seeds):
            sub = replace(params, seed=int(np.random.SeedSequence([params.seed, 7919, k]).generate_state(1)[0]))
            g, _, _ = sample_world(sub)
            vals.append(gini_degree(g))
    return float(np.median(vals))


PEAK_SCAN = tuple(np.round(np.arange(1.2, 2.01, 0.1), 2))


def calibrate_gini(
    params: WorldParams,
    target: float,
    tol: float = 0.02,
    seeds: int = 5,
    max_iter: int = 30,
    max_exponent: float = 50.0,
    full_output: bool = False,
):
    """Bisect ``power_exponent`` until the median Gini-Degree is within ``tol`` of ``target``.

    Gini-Degree falls as the exponent grows, except near 1 where one hub
    absorbs a whole class and the rest of the graph turns homogeneous again.
    A coarse scan finds the exponent with the largest Gini, and bisection on
    ``log(exponent - 1)`` runs between it and ``max_exponent``.  Raises if
    the target lies outside the interval reachable on that branch.
    """
    history = []

    def at(expo):
        val = measure_gini(replace(params, power_exponent=float(expo)), seeds)
        history.append((float(expo), val))
        return val

    def done(expo, val, it):
        result = Calibration(replace(params, power_exponent=float(expo)), val, it, history)
        return result if full_output else result.params

    cur = at(params.power_exponent)
    if abs(cur - target) < tol:
        return done(params.power_exponent, cur, 0)
    peak = [(e, at(e)) for e in PEAK_SCAN]
    lo, g_lo = max(peak, key=lambda h: h[1])
    hi, g_hi = max_exponent, at(max_exponent)
    if not (g_hi - tol < target < g_lo + tol):
        raise ValueError(f"target Gini {target} outside the achievable interval [{g_hi:.3f}, {g_lo:.3f}]")
    for expo, val in ((lo, g_lo), (hi, g_hi)):
        if abs(val - target) < tol:
            return done(expo, val, 0)
    a, b = math.log(lo - 1), math.log(hi - 1)
    best = (lo, g_lo)
    for it in range(1, max_iter + 1):
        mid = 0.5 * (a + b)
        expo = 1 + math.exp(mid)
        val = at(expo)
        if abs(val - target) < abs(best[1] - target):
            best = (expo, val)
        if abs(val - target) < tol:
            return done(expo, val, it)
        if val > target:
            a = mid
        else:
            b = mid
    raise ValueError(
        f"calibration did not reach Gini {target} +/- {tol} in {max_iter} steps "
        f"(closest {best[1]:.4f} at exponent {best[0]:.4g})"
    )
