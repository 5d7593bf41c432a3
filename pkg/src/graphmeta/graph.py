"""Sparse graph container plus readers/writers for edge lists, JSON, features and labels."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when an input file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable graph with integer edge multiplicities.

    ``adj`` is a CSR matrix with int64 weights and an empty diagonal.  For
    undirected graphs it is symmetric and ``m`` counts each unordered pair
    once (multiplicities summed).  For directed graphs ``adj[u, v]`` is the
    multiplicity of the arc u -> v and ``m`` is the total arc weight.
    """

    adj: sp.csr_matrix
    directed: bool = False
    node_ids: tuple = ()
    self_loops_dropped: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        adj = sp.csr_matrix(self.adj, dtype=np.int64)
        adj.sum_duplicates()
        adj.eliminate_zeros()
        adj.sort_indices()
        if adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got {adj.shape}")
        if adj.nnz and adj.data.min() < 0:
            raise ValueError("edge multiplicities must be non-negative")
        if adj.diagonal().any():
            raise ValueError("self-loops must not be stored")
        if not self.directed and (adj != adj.T).nnz:
            raise ValueError("undirected adjacency must be symmetric")
        adj.data.flags.writeable = False
        object.__setattr__(self, "adj", adj)
        if not self.node_ids:
            object.__setattr__(self, "node_ids", tuple(range(adj.shape[0])))
        elif len(self.node_ids) != adj.shape[0]:
            raise ValueError("node_ids length does not match node count")

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def m(self) -> int:
        total = int(self.adj.data.sum())
        return total if self.directed else total // 2

    @classmethod
    def from_edges(cls, n, edges, weights=None, directed=False, **kwargs) -> "Graph":
        """Build a graph from an (k, 2) array of endpoint pairs.

        Duplicate pairs are summed; self-loops are dropped and counted.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.ones(len(edges), dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint outside [0, n)")
        loops = edges[:, 0] == edges[:, 1]
        n_loops = int(loops.sum())
        edges, w = edges[~loops], w[~loops]
        u, v = edges[:, 0], edges[:, 1]
        if not directed:
            u, v, w = np.concatenate([u, v]), np.concatenate([v, u]), np.concatenate([w, w])
        adj = sp.csr_matrix((w, (u, v)), shape=(n, n), dtype=np.int64)
        kwargs.setdefault("self_loops_dropped", n_loops)
        return cls(adj, directed=directed, **kwargs)

    def edge_array(self):
        """Return ``(u, v, w)`` with one entry per stored pair.

        Undirected graphs report each unordered pair once with u < v.
        """
        coo = self.adj.tocoo()
        u, v, w = coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data
        if not self.directed:
            keep = u < v
            u, v, w = u[keep], v[keep], w[keep]
        order = np.lexsort((v, u))
        return u[order], v[order], w[order]

    def simple(self) -> "Graph":
        """Copy with multiplicities clamped to 1."""
        adj = self.adj.copy()
        adj.data = np.minimum(adj.data, 1)
        return Graph(adj, directed=self.directed, node_ids=self.node_ids)

    def undirected(self) -> "Graph":
        """Symmetrized view; for an undirected graph returns self."""
        if not self.directed:
            return self
        key = "undirected"
        if key not in self._cache:
            sym = self.adj + self.adj.T
            self._cache[key] = Graph(sym, directed=False, node_ids=self.node_ids)
        return self._cache[key]

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.directed == other.directed
            and self.adj.shape == other.adj.shape
            and (self.adj != other.adj).nnz == 0
        )

    __hash__ = None


def degree_vector(g: Graph, augmented: bool = False, clamp: bool = False) -> np.ndarray:
    """Row sums of A (or A + I when ``augmented``); multiplicities count unless ``clamp``.

    Directed graphs report total degree (in + out).
    """
    adj = g.adj
    if clamp:
        deg = np.diff(adj.indptr).astype(np.int64)
        if g.directed:
            deg = deg + np.bincount(adj.indices, minlength=g.n)
    else:
        deg = np.asarray(adj.sum(axis=1)).ravel().astype(np.int64)
        if g.directed:
            deg = deg + np.asarray(adj.sum(axis=0)).ravel().astype(np.int64)
    return deg + 1 if augmented else deg


# ---------------------------------------------------------------- readers


def _remap(tokens):
    """Dense ids in sorted order (numeric when every token is an integer)."""
    uniq = set(tokens)
    try:
        ordered = sorted(uniq, key=int)
        ids = tuple(int(t) for t in ordered)
    except ValueError:
        ordered = sorted(uniq)
        ids = tuple(ordered)
    index = {tok: i for i, tok in enumerate(ordered)}
    return ids, index


def load_graph(path, format: str | None = None, directed: bool = False, idmap_path=None) -> Graph:
    """Read an edge-list TSV or JSON graph.

    ``format`` is ``"edge-list-tsv"`` or ``"json"``; inferred from the suffix
    when omitted.  Node ids are reindexed densely; when ``idmap_path`` is given
    the ``dense_id<TAB>original_id`` table is written there.
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "edge-list-tsv"
    if format == "json":
        g = _load_json(path)
    elif format in ("edge-list-tsv", "tsv"):
        g = _load_tsv(path, directed)
    else:
        raise ValueError(f"unknown graph format {format!r}")
    if g.self_loops_dropped:
        logger.warning("%s: dropped %d self-loop(s)", path, g.self_loops_dropped)
    if idmap_path is not None:
        write_id_map(g, idmap_path)
    return g


def _load_tsv(path: Path, directed: bool) -> Graph:
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}")
            pairs.append((parts[0].strip(), parts[1].strip()))
    ids, index = _remap([t for p in pairs for t in p])
    edges = np.array([[index[a], index[b]] for a, b in pairs], dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(len(ids), edges, directed=directed, node_ids=ids)


def _load_json(path: Path) -> Graph:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    try:
        n = int(doc["n"])
        directed = bool(doc.get("directed", False))
        raw = doc["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"{path}: missing or invalid field ({exc})") from exc
    edges, weights = [], []
    for k, e in enumerate(raw):
        if not isinstance(e, list) or len(e) not in (2, 3):
            raise GraphFormatError(f"{path}: edge #{k} must be [u, v] or [u, v, weight]")
        edges.append((int(e[0]), int(e[1])))
        weights.append(int(e[2]) if len(e) == 3 else 1)
    if weights and min(weights) < 0:
        raise GraphFormatError(f"{path}: negative edge weight")
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2), weights, directed=directed)


def write_graph(g: Graph, path, format: str | None = None) -> None:
    """Write ``g`` so that :func:`load_graph` reproduces it.

    TSV repeats a line per unit of multiplicity (isolated nodes are not
    representable in TSV; use JSON to keep them).
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "edge-list-tsv"
    u, v, w = g.edge_array()
    if format == "json":
        edges = [[int(a), int(b)] if c == 1 else [int(a), int(b), int(c)] for a, b, c in zip(u, v, w)]
        doc = {"n": g.n, "directed": g.directed, "edges": edges}
        path.write_text(json.dumps(doc, separators=(",", ":")) + "\n")
    else:
        ids = g.node_ids
        with open(path, "w") as fh:
            for a, b, c in zip(u, v, w):
                line = f"{ids[a]}\t{ids[b]}\n"
                fh.write(line * int(c))


def write_id_map(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write("dense_id\toriginal_id\n")
        for i, orig in enumerate(g.node_ids):
            fh.write(f"{i}\t{orig}\n")


def _node_index(g: Graph, token: str, path, lineno) -> int:
    key = g._cache.get("id_index")
    if key is None:
        key = {str(orig): i for i, orig in enumerate(g.node_ids)}
        g._cache["id_index"] = key
    try:
        return key[token]
    except KeyError:
        raise GraphFormatError(f"{path}:{lineno}: unknown node id {token!r}") from None


def load_features(path, g: Graph | None = None) -> np.ndarray:
    """Features CSV (header row, node id first) -> dense ``(n, d)`` float array.

    With ``g`` the rows are aligned to the graph's dense ids; otherwise the
    node id column must already be dense.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise GraphFormatError(f"{path}: empty file")
    body = rows[1:]
    n = g.n if g is not None else len(body)
    d = len(rows[0]) - 1
    x = np.full((n, d), np.nan)
    for lineno, row in enumerate(body, 2):
        if len(row) != d + 1:
            raise GraphFormatError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            i = _node_index(g, row[0], path, lineno) if g is not None else int(row[0])
            x[i] = [float(v) for v in row[1:]]
        except GraphFormatError:
            raise
        except (ValueError, IndexError) as exc:
            raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
    if not np.isfinite(x).all():
        raise GraphFormatError(f"{path}: missing rows or non-finite feature values")
    return x


def load_labels(path, g: Graph | None = None) -> np.ndarray:
    """Labels CSV (``node_id,label``; an optional header is skipped) -> int array."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not rows[0][-1].strip().lstrip("-").isdigit():
        rows, start = rows[1:], 2
    else:
        start = 1
    n = g.n if g is not None else len(rows)
    y = np.full(n, -1, dtype=np.int64)
    for lineno, row in enumerate(rows, start):
        if len(row) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'node_id,label'")
        try:
            i = _node_index(g, row[0].strip(), path, lineno) if g is not None else int(row[0])
            y[i] = int(row[1])
        except GraphFormatError:
            raise
        except (ValueError, IndexError) as exc:
            raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
    if (y < 0).any():
        raise GraphFormatError(f"{path}: missing or negative labels")
    return y


def write_features(x: np.ndarray, path, node_ids=None) -> None:
    x = np.asarray(x, dtype=float)
    ids = node_ids if node_ids is not None else range(x.shape[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id"] + [f"x{k}" for k in range(x.shape[1])])
        for i, row in zip(ids, x):
            w.writerow([i] + [repr(float(v)) for v in row])


def write_labels(y: np.ndarray, path, node_ids=None) -> None:
    ids = node_ids if node_ids is not None else range(len(y))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "label"])
        for i, lab in zip(ids, y):
            w.writerow([i, int(lab)])


def check_labels(y, n: int | None = None):
    """Validate a label vector; return it as int64 with the class count."""
    y = np.asarray(y)
    if y.ndim != 1 or (y.size and (y.min() < 0 or not np.issubdtype(y.dtype, np.integer))):
        raise ValueError("labels must be a 1-d vector of non-negative integers")
    if n is not None and len(y) != n:
        raise ValueError(f"label vector has length {len(y)}, graph has {n} nodes")
    return y.astype(np.int64), int(y.max()) + 1 if y.size else 0


def check_features(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("features must be a 2-d array")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"feature matrix has {x.shape[0]} rows, graph has {n} nodes")
    if not np.isfinite(x).all():
        raise ValueError("feature matrix contains non-finite values")
    return x
