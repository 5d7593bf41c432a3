"""The fifteen dataset properties used as regression covariates.

Structural statistics clamp edge multiplicities to 1; degree-based ones
(average degree, Gini-Degree, homophily) and the label/feature statistics
count multiplicities.  Every function accepts ``clamp=`` to override that
split.  Statistically undefined values (zero variance, no qualifying edges)
come back as NaN; impossible inputs raise :class:`ValueError`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .graph import Graph, check_features, check_labels, degree_vector

STRUCTURAL = (
    "edge_density",
    "average_degree",
    "degree_assortativity",
    "pseudo_diameter",
    "rslcc",
    "acc",
    "transitivity",
    "degeneracy",
    "gini_degree",
)
LABEL_BASED = ("edge_homogeneity", "homophily_measure", "attribute_assortativity")
FEATURE_BASED = ("in_feature_similarity", "out_feature_similarity", "feature_angular_snr")
PROPERTY_NAMES = STRUCTURAL + (
    "edge_homogeneity",
    "in_feature_similarity",
    "out_feature_similarity",
    "feature_angular_snr",
    "homophily_measure",
    "attribute_assortativity",
)


def _adj(g: Graph, clamp: bool) -> sp.csr_matrix:
    if not clamp:
        return g.adj
    key = "simple_adj"
    if key not in g._cache:
        a = g.adj.copy()
        a.data = np.ones_like(a.data)
        g._cache[key] = a
    return g._cache[key]


def _undirected_simple(g: Graph) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency (weak view of directed graphs)."""
    key = "undirected_simple"
    if key not in g._cache:
        a = g.adj if not g.directed else (g.adj + g.adj.T).tocsr()
        a = a.copy()
        a.data = np.ones_like(a.data)
        a.sort_indices()
        g._cache[key] = a
    return g._cache[key]


# ------------------------------------------------------------------ basic


def edge_density(g: Graph) -> float:
    n = g.n
    if n < 2:
        raise ValueError("edge density needs at least two nodes")
    # stored entries: one per arc when directed, two per edge otherwise
    return _adj(g, True).nnz / (n * (n - 1))


def average_degree(g: Graph, clamp: bool = False) -> float:
    if g.n < 1:
        raise ValueError("average degree of an empty graph")
    # 2m/n undirected (both directions stored), m/n directed
    return int(_adj(g, clamp).data.sum()) / g.n


def degree_assortativity(g: Graph, clamp: bool = True) -> float:
    """Pearson correlation of endpoint degrees over ordered edge pairs.

    Undirected edges enter once per direction.  Returns NaN when the
    endpoint degrees have zero variance.
    """
    a = _adj(g, clamp)
    deg = degree_vector(g, clamp=clamp).astype(float)
    coo = a.tocoo()
    if coo.nnz < 2:
        return math.nan
    w = coo.data.astype(float)
    x, y = deg[coo.row], deg[coo.col]
    wsum = w.sum()
    mx, my = (w * x).sum() / wsum, (w * y).sum() / wsum
    cov = (w * (x - mx) * (y - my)).sum()
    vx, vy = (w * (x - mx) ** 2).sum(), (w * (y - my) ** 2).sum()
    if vx <= 0 or vy <= 0:
        return math.nan
    return float(np.clip(cov / math.sqrt(vx * vy), -1.0, 1.0))


# ------------------------------------------------------- distance/connectivity


def _components(g: Graph):
    key = "components"
    if key not in g._cache:
        g._cache[key] = csgraph.connected_components(_undirected_simple(g), directed=False)
    return g._cache[key]


def _bfs_dist(a: sp.csr_matrix, source: int) -> np.ndarray:
    """Hop distances from ``source``; -1 for unreachable nodes."""
    n = a.shape[0]
    indptr, indices = a.indptr, a.indices
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        starts, stops = indptr[frontier], indptr[frontier + 1]
        lens = stops - starts
        if lens.sum() == 0:
            break
        offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(lens.sum())
        nbrs = indices[offs]
        nbrs = np.unique(nbrs[dist[nbrs] < 0])
        dist[nbrs] = level
        frontier = nbrs
    return dist


def pseudo_diameter(g: Graph, max_sweeps: int = 10) -> int:
    """Double-sweep BFS lower bound on the diameter of the largest component.

    Starts at the highest-degree node of the largest (weakly) connected
    component; each sweep restarts from the farthest node found so far
    (lowest degree, then lowest index, among ties) and stops once the
    eccentricity stops growing.
    """
    if g.n == 0:
        return 0
    a = _undirected_simple(g)
    _, comp = _components(g)
    big = np.bincount(comp).argmax()
    members = np.flatnonzero(comp == big)
    deg = np.diff(a.indptr)
    source = int(members[np.argmax(deg[members])])
    best = 0
    for _ in range(max_sweeps):
        dist = _bfs_dist(a, source)
        ecc = int(dist.max())
        if ecc <= best and best > 0:
            break
        best = max(best, ecc)
        far = np.flatnonzero(dist == ecc)
        source = int(far[np.lexsort((far, deg[far]))[0]])
        if ecc == 0:
            break
    return best


def rslcc(g: Graph) -> float:
    if g.n == 0:
        raise ValueError("relative LCC size of an empty graph")
    _, comp = _components(g)
    return float(np.bincount(comp).max() / g.n)


# ------------------------------------------------------------- clustering


def _triangles(g: Graph, block: int = 16384) -> np.ndarray:
    """Per-node triangle counts on the undirected simple view.

    Edges are oriented from lower to higher (degree, index) rank, which
    bounds every out-degree by sqrt(2m).  A triangle with ranks a < b < c
    then appears once in ``(L L) * L`` at (a, c) and once in
    ``(L^T L) * L`` at (b, c).
    """
    key = "triangles"
    if key not in g._cache:
        a = _undirected_simple(g)
        n = a.shape[0]
        deg = np.diff(a.indptr)
        rank = np.empty(n, dtype=np.int64)
        rank[np.lexsort((np.arange(n), deg))] = np.arange(n)
        coo = a.tocoo()
        up = rank[coo.row] < rank[coo.col]
        ones = np.ones(int(up.sum()), dtype=np.int64)
        low = sp.csr_matrix((ones, (coo.row[up], coo.col[up])), shape=(n, n))
        low_t = low.T.tocsr()
        tri = np.zeros(n, dtype=np.int64)
        for lo in range(0, n, block):
            rows = low[lo:lo + block]
            closed = (rows @ low).multiply(rows)
            tri[lo:lo + block] += np.asarray(closed.sum(axis=1)).ravel()
            tri += np.asarray(closed.sum(axis=0)).ravel()
            middle = (low_t[lo:lo + block] @ low).multiply(rows)
            tri[lo:lo + block] += np.asarray(middle.sum(axis=1)).ravel()
        g._cache[key] = tri
    return g._cache[key]


def _local_clustering(g: Graph) -> np.ndarray:
    if not g.directed:
        tri = _triangles(g).astype(float)
        deg = np.diff(_undirected_simple(g).indptr).astype(float)
        denom = deg * (deg - 1)
        return np.divide(2 * tri, denom, out=np.zeros_like(tri), where=denom > 0)
    # directed: T(u) counts directed triangles so that 2T/(d_tot(d_tot-1) - 2 d_recip)
    # reproduces the usual directed clustering; T(u) = (S^3)_uu / 4 with S = A + A^T.
    a = _adj(g, True).astype(np.int64)
    s = (a + a.T).tocsr()
    s3_diag = np.asarray((s @ s).multiply(s.T).sum(axis=1)).ravel().astype(float)
    tri = s3_diag / 4
    d_tot = (np.diff(a.indptr) + np.bincount(a.indices, minlength=g.n)).astype(float)
    d_recip = np.asarray(a.multiply(a.T).sum(axis=1)).ravel().astype(float)
    denom = d_tot * (d_tot - 1) - 2 * d_recip
    return np.divide(2 * tri, denom, out=np.zeros_like(tri), where=denom > 0)


def avg_clustering_coefficient(g: Graph) -> float:
    """Mean local clustering; nodes with fewer than two neighbours count as 0."""
    if g.n == 0:
        raise ValueError("clustering of an empty graph")
    return float(_local_clustering(g).mean())


def transitivity(g: Graph) -> float:
    tri = _triangles(g)
    deg = np.diff(_undirected_simple(g).indptr).astype(np.int64)
    triads = int((deg * (deg - 1) // 2).sum())
    if triads == 0:
        return 0.0
    return float(tri.sum()) / triads


def core_numbers(g: Graph) -> np.ndarray:
    """k-core index of every node via batched minimum-degree peeling."""
    a = _undirected_simple(g)
    n = a.shape[0]
    deg = np.diff(a.indptr).astype(np.int64)
    core = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    k = 0
    remaining = n
    while remaining:
        peel = np.flatnonzero(alive & (deg <= k))
        if peel.size == 0:
            k = int(deg[alive].min())
            continue
        core[peel] = k
        alive[peel] = False
        remaining -= peel.size
        hit = a[peel].indices
        deg -= np.bincount(hit, minlength=n)
    return core


def degeneracy(g: Graph) -> int:
    if g.n == 0:
        return 0
    return int(core_numbers(g).max())


# ------------------------------------------------------------ degree spread


def gini_degree(g: Graph, augmented: bool = False, clamp: bool = False) -> float:
    """Mean-absolute-difference Gini of the degree sequence.

    Evaluated as ``sum_i (2i - n - 1) d_(i) / (n sum d)`` over sorted
    degrees, which equals ``sum_ij |d_i - d_j| / (2 n^2 mean(d))``.
    """
    deg = np.sort(degree_vector(g, augmented=augmented, clamp=clamp))
    return gini(deg)


def gini(values) -> float:
    values = np.sort(np.asarray(values))
    n = values.size
    if n == 0:
        raise ValueError("Gini of an empty sequence")
    if np.issubdtype(values.dtype, np.integer):
        total = int(values.sum())
        coef = 2 * np.arange(1, n + 1, dtype=np.int64) - n - 1
        num = int((coef * values.astype(np.int64)).sum())
    else:
        total = float(values.sum())
        num = float(((2 * np.arange(1, n + 1) - n - 1) * values).sum())
    if total == 0:
        raise ValueError("Gini of an all-zero degree sequence")
    return num / (n * total)


# --------------------------------------------------------------- attributes


def _edge_list(g: Graph, clamp: bool):
    u, v, w = g.edge_array()
    if clamp:
        w = np.ones_like(w)
    return u, v, w.astype(float)


def edge_homogeneity(g: Graph, y, clamp: bool = False) -> float:
    y, _ = check_labels(y, g.n)
    u, v, w = _edge_list(g, clamp)
    if w.sum() == 0:
        return math.nan
    return float(w[y[u] == y[v]].sum() / w.sum())


def angular_similarity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise ``1 - angle(a, b) / pi``.

    The angle is taken as ``2 atan2(|a' - b'|, |a' + b'|)`` on unit vectors,
    which equals ``arccos`` of the clamped cosine but keeps full precision
    for nearly parallel rows.
    """
    ua = a / np.linalg.norm(a, axis=1, keepdims=True)
    ub = b / np.linalg.norm(b, axis=1, keepdims=True)
    angle = 2 * np.arctan2(np.linalg.norm(ua - ub, axis=1), np.linalg.norm(ua + ub, axis=1))
    return 1.0 - angle / np.pi


def feature_similarities(g: Graph, x, y, clamp: bool = False):
    """Return ``(in_sim, out_sim, snr)``; NaN for any part without qualifying edges."""
    x = check_features(x, g.n)
    y, _ = check_labels(y, g.n)
    u, v, w = _edge_list(g, clamp)
    norms = np.linalg.norm(x, axis=1)
    bad = np.concatenate([u, v])[np.concatenate([norms[u], norms[v]]) == 0]
    if bad.size:
        raise ValueError(f"zero-norm feature row at node {g.node_ids[int(bad.min())]}")
    sim = angular_similarity(x[u], x[v])
    same = y[u] == y[v]
    ws, wd = w[same], w[~same]
    in_sim = float((sim[same] * ws).sum() / ws.sum()) if ws.sum() > 0 else math.nan
    out_sim = float((sim[~same] * wd).sum() / wd.sum()) if wd.sum() > 0 else math.nan
    snr = in_sim / out_sim if not (math.isnan(in_sim) or math.isnan(out_sim)) and out_sim > 0 else math.nan
    return in_sim, out_sim, snr


def homophily_measure(g: Graph, y, clamp: bool = False) -> float:
    """Class-insensitive homophily: mean positive excess of h_k over the class share."""
    y, c = check_labels(y, g.n)
    if c < 2:
        raise ValueError("homophily measure needs at least two classes")
    a = _adj(g, clamp).tocoo()
    w = a.data.astype(float)
    same = y[a.row] == y[a.col]
    num = np.bincount(y[a.row], weights=w * same, minlength=c)
    den = np.bincount(y[a.row], weights=w, minlength=c)
    h = np.divide(num, den, out=np.zeros(c), where=den > 0)
    share = np.bincount(y, minlength=c) / g.n
    return float(np.maximum(h - share, 0).sum() / (c - 1))


def mixing_matrix(g: Graph, y, clamp: bool = False) -> np.ndarray:
    """Normalized label-mixing matrix e_kl over ordered edge endpoints."""
    y, c = check_labels(y, g.n)
    a = _adj(g, clamp).tocoo()
    e = np.zeros((c, c))
    np.add.at(e, (y[a.row], y[a.col]), a.data.astype(float))
    total = e.sum()
    return e / total if total > 0 else e


def attribute_assortativity(g: Graph, y, clamp: bool = False) -> float:
    """Categorical assortativity ``(tr e - sum a_k b_k) / (1 - sum a_k b_k)``."""
    e = mixing_matrix(g, y, clamp)
    if e.sum() == 0:
        return math.nan
    ab = float(e.sum(axis=1) @ e.sum(axis=0))
    if ab >= 1.0 - 1e-15:
        return math.nan
    return float(np.clip((np.trace(e) - ab) / (1.0 - ab), -1.0, 1.0))


# ----------------------------------------------------------------- profile


@dataclass
class PropertyVector:
    """Named property values; ``flags`` maps a property to why it is missing."""

    values: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    dataset: str = ""

    def __getitem__(self, name):
        return self.values.get(name)

    def as_array(self) -> np.ndarray:
        return np.array([np.nan if self.values.get(k) is None else self.values[k] for k in PROPERTY_NAMES])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("dataset",) + PROPERTY_NAMES)
        w.writerow([self.dataset] + ["" if self.values.get(k) is None else repr(self.values[k]) for k in PROPERTY_NAMES])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "dataset": self.dataset,
            "properties": {k: self.values.get(k) for k in PROPERTY_NAMES},
            "flags": {k: self.flags[k] for k in PROPERTY_NAMES if k in self.flags},
        }
        return json.dumps(doc, indent=2, sort_keys=False)


def _tasks(g, x, y):
    tasks = {
        "edge_density": lambda: edge_density(g),
        "average_degree": lambda: average_degree(g),
        "degree_assortativity": lambda: degree_assortativity(g),
        "pseudo_diameter": lambda: pseudo_diameter(g),
        "rslcc": lambda: rslcc(g),
        "acc": lambda: avg_clustering_coefficient(g),
        "transitivity": lambda: transitivity(g),
        "degeneracy": lambda: degeneracy(g),
        "gini_degree": lambda: gini_degree(g),
    }
    if y is not None:
        tasks["edge_homogeneity"] = lambda: edge_homogeneity(g, y)
        tasks["homophily_measure"] = lambda: homophily_measure(g, y)
        tasks["attribute_assortativity"] = lambda: attribute_assortativity(g, y)
        if x is not None:
            tasks["feature_similarities"] = lambda: feature_similarities(g, x, y)
    return tasks


def profile(g: Graph, x=None, y=None, dataset: str = "", n_jobs: int = 1) -> PropertyVector:
    """Compute all fifteen properties, flagging the ones that cannot be evaluated.

    Errors never abort the profile; they become entries in ``flags``.
    ``n_jobs > 1`` evaluates properties on a thread pool with the same result.
    """
    # shared intermediates first so threads only read the cache
    if g.n:
        _components(g)
        _triangles(g)
    tasks = _tasks(g, x, y)
    out = {}

    def run(item):
        name, fn = item
        try:
            return name, fn(), None
        except ValueError as exc:
            return name, None, str(exc)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(run, tasks.items()))
    else:
        results = [run(item) for item in tasks.items()]

    pv = PropertyVector(dataset=dataset)
    for name, value, err in results:
        if name == "feature_similarities":
            names = FEATURE_BASED
            value = (None, None, None) if value is None else value
            for k, val in zip(names, value):
                out[k] = (val, err)
        else:
            out[name] = (value, err)
    for name in PROPERTY_NAMES:
        if name not in out:
            needs = "features and labels" if name in FEATURE_BASED else "labels"
            pv.values[name] = None
            pv.flags[name] = f"missing input: {needs}"
            continue
        value, err = out[name]
        if err is not None:
            pv.values[name] = None
            pv.flags[name] = err
        elif value is None or (isinstance(value, float) and math.isnan(value)):
            pv.values[name] = None
            pv.flags[name] = "undefined"
        else:
            pv.values[name] = int(value) if name in ("pseudo_diameter", "degeneracy") else float(value)
    return pv
