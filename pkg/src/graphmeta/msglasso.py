"""Multivariate sparse group lasso on dataset-property metadata.

Minimizes::

    (1 / 2n) ||Y - X B||_F^2 + lambda1 * sum_ij |B_ij| + lambda_g * sum_i ||B_i.||_2

where each row of ``B`` (one property across all response models) is a
group.  The solver is FISTA with a monotone safeguard: whenever the
accelerated point does not decrease the objective, momentum is reset and a
plain proximal-gradient step is taken instead, so the recorded objective
trace never increases.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetadataTable:
    """Covariates ``X`` (n x p) and responses ``Y`` (n x q) with names."""

    X: np.ndarray
    Y: np.ndarray
    rows: tuple = ()
    x_names: tuple = ()
    y_names: tuple = ()

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        n, p = X.shape
        q = Y.shape[1]
        if not self.rows:
            object.__setattr__(self, "rows", tuple(str(i) for i in range(n)))
        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"x{j}" for j in range(p)))
        if not self.y_names:
            object.__setattr__(self, "y_names", tuple(f"y{j}" for j in range(q)))
        for names, size, what in ((self.x_names, p, "covariate"), (self.y_names, q, "response")):
            if len(names) != size:
                raise ValueError(f"{what} names do not match column count")
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate {what} names")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]

    def take_rows(self, idx) -> "MetadataTable":
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], Y=self.Y[idx], rows=tuple(self.rows[i] for i in idx))


@dataclass(frozen=True)
class Scaling:
    """Column centers/scales used by :func:`standardize`, plus dropped columns."""

    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: np.ndarray
    y_scale: np.ndarray
    dropped: tuple = ()

    def coef_to_original(self, B: np.ndarray) -> np.ndarray:
        """Map a coefficient matrix from standardized to original units."""
        return B / self.x_scale[:, None] * self.y_scale[None, :]


@dataclass
class CoefficientMatrix:
    B: np.ndarray
    lambda1: float
    lambda_g: float
    objective_trace: list = field(default_factory=list)
    kkt_residual: float = math.inf
    iterations: int = 0
    converged: bool = False
    x_names: tuple = ()
    y_names: tuple = ()

    @property
    def support(self) -> np.ndarray:
        """Indices of rows with at least one nonzero coefficient."""
        return np.flatnonzero(np.any(self.B != 0, axis=1))


def standardize(t: MetadataTable, zero_variance: str = "drop"):
    """Center every column and scale it to unit (population) standard deviation.

    Constant covariate or response columns are dropped with a warning when
    ``zero_variance="drop"`` and raise otherwise.
    """
    def scale(M, names, what):
        center = M.mean(axis=0)
        sd = M.std(axis=0)
        bad = sd <= 1e-12 * np.maximum(1.0, np.abs(center))
        dropped = tuple(names[j] for j in np.flatnonzero(bad))
        if dropped:
            if zero_variance != "drop":
                raise ValueError(f"zero-variance {what} column(s): {', '.join(dropped)}")
            logger.warning("dropping zero-variance %s column(s): %s", what, ", ".join(dropped))
        keep = ~bad
        Z = (M[:, keep] - center[keep]) / sd[keep]
        # one refinement pass removes residual rounding in the mean
        Z -= Z.mean(axis=0)
        Z /= Z.std(axis=0)
        return Z, center[keep], sd[keep], tuple(n for n, k in zip(names, keep) if k), dropped

    if t.n < 2:
        raise ValueError("standardization needs at least two rows")
    X, xc, xs, xn, xd = scale(t.X, t.x_names, "covariate")
    Y, yc, ys, yn, yd = scale(t.Y, t.y_names, "response")
    table = MetadataTable(X, Y, t.rows, xn, yn)
    return table, Scaling(xc, xs, yc, ys, xd + yd)


def objective(t: MetadataTable, B, lambda1: float, lambda_g: float) -> float:
    B = np.asarray(B, dtype=float).reshape(t.p, t.q)
    R = t.Y - t.X @ B
    return float(
        (R * R).sum() / (2 * t.n)
        + lambda1 * np.abs(B).sum()
        + lambda_g * np.linalg.norm(B, axis=1).sum()
    )


def soft_threshold(a, t):
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def prox_sparse_group(row, t1: float, tg: float) -> np.ndarray:
    """Proximal map of ``t1 ||.||_1 + tg ||.||_2`` for one group.

    Works on a single row or, applied per row, on a whole matrix.
    """
    row = np.asarray(row, dtype=float)
    s = soft_threshold(row, t1)
    norm = np.linalg.norm(s, axis=-1, keepdims=True)
    factor = np.where(norm > tg, 1.0 - tg / np.where(norm > 0, norm, 1.0), 0.0)
    return s * factor


def kkt_residual(t: MetadataTable, B, lambda1: float, lambda_g: float) -> float:
    """Largest minimal-subgradient magnitude of the objective at ``B``."""
    G = t.X.T @ (t.X @ B - t.Y) / t.n
    worst = 0.0
    for i in range(t.p):
        b, g = B[i], G[i]
        norm = np.linalg.norm(b)
        if norm == 0:
            r = max(np.linalg.norm(soft_threshold(g, lambda1)) - lambda_g, 0.0)
        else:
            nz = b != 0
            r_nz = np.abs(g[nz] + lambda1 * np.sign(b[nz]) + lambda_g * b[nz] / norm)
            r_z = np.maximum(np.abs(g[~nz]) - lambda1, 0.0)
            r = max(r_nz.max(initial=0.0), r_z.max(initial=0.0))
        worst = max(worst, float(r))
    return worst


def lipschitz_constant(X: np.ndarray, n_iter: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """``sigma_max(X^T X) / n`` by power iteration."""
    n, p = X.shape
    if p == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(p)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = X.T @ (X @ v)
        new = float(np.linalg.norm(w))
        if new == 0:
            return 0.0
        v = w / new
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    # power iteration approaches from below; pad so 1/L stays a safe step
    return lam * (1 + 1e-9) / n


def solve(
    t: MetadataTable,
    lambda1: float,
    lambda_g: float,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    kkt_tol: float = 1e-10,
    B0=None,
    L: float | None = None,
) -> CoefficientMatrix:
    """Minimize the sparse group lasso objective on a (standardized) table.

    Stops once the relative objective change of an iteration drops below
    ``tol`` and the KKT residual is at most ``kkt_tol``; if ``max_iter`` is
    reached the best iterate is returned with ``converged=False``.
    """
    if lambda1 < 0 or lambda_g < 0:
        raise ValueError("penalties must be non-negative")
    X, Y, n = t.X, t.Y, t.n
    XtX, XtY = X.T @ X / n, X.T @ Y / n
    if L is None:
        L = lipschitz_constant(X)
    B = np.zeros((t.p, t.q)) if B0 is None else np.array(B0, dtype=float)
    if L == 0:
        # X == 0: the smooth part is constant and B = 0 is optimal
        B = np.zeros((t.p, t.q))
        return CoefficientMatrix(B, float(lambda1), float(lambda_g), [objective(t, B, lambda1, lambda_g)],
                                 kkt_residual(t, B, lambda1, lambda_g), 0, True, t.x_names, t.y_names)
    step = 1.0 / L
    yy_over_2n = (Y * Y).sum() / (2 * n)

    def f(M):
        # (1/2n)||Y - XM||^2 expanded via the Gram matrices
        smooth = 0.5 * np.sum(M * (XtX @ M)) - np.sum(M * XtY) + yy_over_2n
        return smooth + lambda1 * np.abs(M).sum() + lambda_g * np.linalg.norm(M, axis=1).sum()

    def prox_step(M):
        grad = XtX @ M - XtY
        return prox_sparse_group(M - step * grad, step * lambda1, step * lambda_g)

    F = f(B)
    trace = [F]
    Z, tk = B.copy(), 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        cand = prox_step(Z)
        Fc = f(cand)
        if not np.isfinite(Fc):
            raise FloatingPointError(f"non-finite objective at iteration {it}")
        if Fc > F:
            # momentum overshot: restart from the current iterate
            tk = 1.0
            # a plain step of size 1/L cannot increase the objective; whatever
            # increase remains here is rounding, so the step is kept
            cand = prox_step(B)
            Fc = f(cand)
        t_next = (1 + math.sqrt(1 + 4 * tk * tk)) / 2
        Z = cand + ((tk - 1) / t_next) * (cand - B)
        tk = t_next
        change = abs(F - Fc)
        B, F = cand, Fc
        trace.append(F)
        if change <= tol * max(abs(F), 1e-300):
            if kkt_residual(t, B, lambda1, lambda_g) <= kkt_tol:
                converged = True
                break
    cm = CoefficientMatrix(
        B=B,
        lambda1=float(lambda1),
        lambda_g=float(lambda_g),
        objective_trace=trace,
        iterations=it,
        converged=converged,
        x_names=t.x_names,
        y_names=t.y_names,
    )
    cm.kkt_residual = kkt_residual(t, B, lambda1, lambda_g)
    if not converged:
        logger.warning("sparse group lasso stopped at max_iter=%d (KKT %.3g)", max_iter, cm.kkt_residual)
    return cm


def lambda_max(t: MetadataTable, ratio: float) -> float:
    """Smallest ``lambda1`` (with ``lambda_g = ratio * lambda1``) for which B = 0."""
    G = t.X.T @ t.Y / t.n
    best = 0.0
    for g in G:
        hi = np.abs(g).max()
        if hi == 0:
            continue
        # ||soft(g, lam)|| - ratio*lam is strictly decreasing on [0, hi]
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(soft_threshold(g, mid)) > ratio * mid:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        best = max(best, hi)
    return best


def regularization_path(
    t: MetadataTable,
    ratio: float = 1.0,
    k: int = 20,
    min_ratio: float = 1e-4,
    **solve_kw,
) -> list:
    """Warm-started solves along a geometric ``lambda1`` grid from ``lambda_max`` down."""
    lmax = lambda_max(t, ratio)
    if k == 1:
        grid = np.array([lmax])
    else:
        grid = lmax * np.geomspace(1.0, min_ratio, k)
    L = lipschitz_constant(t.X)
    path, B = [], None
    for lam in grid:
        cm = solve(t, lam, ratio * lam, B0=B, L=L, **solve_kw)
        B = cm.B
        path.append(cm)
        logger.info("lambda1=%.4g support=%d", lam, cm.support.size)
    return path


def cross_validate(t: MetadataTable, ratio: float = 1.0, k: int = 20, min_ratio: float = 1e-4, **solve_kw):
    """Leave-one-dataset-out prediction error for each point of the path.

    Returns ``(lambdas, errors)``; the user picks the lambda.  Folds reuse
    the full-table grid so errors line up across folds.
    """
    lmax = lambda_max(t, ratio)
    grid = np.array([lmax]) if k == 1 else lmax * np.geomspace(1.0, min_ratio, k)
    errors = np.zeros(len(grid))
    for i in range(t.n):
        train = t.take_rows([j for j in range(t.n) if j != i])
        L = lipschitz_constant(train.X)
        B = None
        for a, lam in enumerate(grid):
            cm = solve(train, lam, ratio * lam, B0=B, L=L, **solve_kw)
            B = cm.B
            resid = t.Y[i] - t.X[i] @ B
            errors[a] += float(resid @ resid)
    return grid, errors / t.n


def support_f1(estimated, planted) -> float:
    est, true = set(np.asarray(estimated).tolist()), set(np.asarray(planted).tolist())
    if not est and not true:
        return 1.0
    tp = len(est & true)
    if tp == 0:
        return 0.0
    precision, recall = tp / len(est), tp / len(true)
    return 2 * precision * recall / (precision + recall)


# ------------------------------------------------------------------ report


@dataclass
class FactorReport:
    name: str
    nonzero: int
    total: int
    category: str  # "widely", "narrowly" or "none"
    sign: str  # "+", "-", "+/-" or ""
    signs: str  # per-response sign pattern, e.g. "--0-"


def salient_report(cm_or_B, x_names=None, y_names=None) -> list:
    """Classify each property row as widely / narrowly influential.

    Widely: nonzero for every response.  Narrowly: nonzero for more than
    half (but not all) of them.
    """
    if isinstance(cm_or_B, CoefficientMatrix):
        B = cm_or_B.B
        x_names = x_names or cm_or_B.x_names
    else:
        B = np.asarray(cm_or_B, dtype=float)
    p, q = B.shape
    x_names = x_names or tuple(f"x{j}" for j in range(p))
    out = []
    for name, row in zip(x_names, B):
        nz = int(np.count_nonzero(row))
        if nz == q:
            cat = "widely"
        elif nz > q / 2:
            cat = "narrowly"
        else:
            cat = "none"
        pos, neg = bool((row > 0).any()), bool((row < 0).any())
        sign = "+/-" if pos and neg else "+" if pos else "-" if neg else ""
        pattern = "".join("+" if v > 0 else "-" if v < 0 else "0" for v in row)
        out.append(FactorReport(name, nz, q, cat, sign, pattern))
    return out


# ----------------------------------------------------------------------- io


def read_named_csv(path):
    """Read a CSV with a header row and row names in the first column.

    Empty cells become NaN.  Returns ``(row_names, col_names, values)``.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    cols = tuple(h.strip() for h in header[1:])
    names, vals = [], []
    for lineno, r in enumerate(body, 2):
        if len(r) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        names.append(r[0].strip())
        try:
            vals.append([float(c) if c.strip() else math.nan for c in r[1:]])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return tuple(names), cols, np.array(vals, dtype=float).reshape(len(names), len(cols))


def build_table(props, perf, missing: str = "drop") -> MetadataTable:
    """Join property and performance tables on dataset names.

    ``props`` / ``perf`` are ``(rows, cols, values)`` triples.  Missing cells
    drop the whole row (``missing="drop"``) or are mean-imputed
    (``missing="impute"``); columns that are entirely missing are dropped.
    """
    prow, pcol, P = props
    rrow, rcol, R = perf
    if set(prow) != set(rrow) or len(prow) != len(rrow):
        only_p = sorted(set(prow) - set(rrow))
        only_r = sorted(set(rrow) - set(prow))
        raise ValueError(f"row names differ: only in properties {only_p}, only in performance {only_r}")
    order = [rrow.index(r) for r in prow]
    R = R[order]

    def drop_empty_cols(M, names):
        keep = ~np.all(np.isnan(M), axis=0)
        if not keep.all():
            logger.warning("dropping all-missing columns: %s", [n for n, k in zip(names, keep) if not k])
        return M[:, keep], tuple(n for n, k in zip(names, keep) if k)

    P, pcol = drop_empty_cols(P, pcol)
    R, rcol = drop_empty_cols(R, rcol)
    rows = prow
    if missing == "drop":
        ok = ~(np.isnan(P).any(axis=1) | np.isnan(R).any(axis=1))
        if not ok.all():
            logger.warning("dropping rows with missing cells: %s", [r for r, k in zip(rows, ok) if not k])
        P, R, rows = P[ok], R[ok], tuple(r for r, k in zip(rows, ok) if k)
    elif missing == "impute":
        for M in (P, R):
            mask = np.isnan(M)
            if mask.any():
                logger.warning("mean-imputing %d missing cell(s)", int(mask.sum()))
                M[mask] = np.take(np.nanmean(M, axis=0), np.nonzero(mask)[1])
    else:
        raise ValueError(f"unknown missing-value policy {missing!r}")
    return MetadataTable(P, R, rows, pcol, rcol)


def write_coefficients(cm: CoefficientMatrix, path, x_names=None, y_names=None) -> None:
    """Write ``B`` as a properties x models CSV (the layout of a coefficient table)."""
    x_names = x_names or cm.x_names
    y_names = y_names or cm.y_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["property"] + list(y_names))
        for name, row in zip(x_names, cm.B):
            w.writerow([name] + [repr(float(v)) for v in row])
