"""
Weight matrices from lattice geometry or from distances between series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Panel, WeightMatrix, as_matrix

__all__ = [
    "DistanceMatrix",
    "correlation_distance",
    "euclidean_distance",
    "grid_contiguity",
    "knn_weights",
    "piccolo_distance",
    "row_standardize",
]


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric, nonnegative ``(n, n)`` distances with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        d = np.array(self.entries, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.all(np.isfinite(d)):
            raise ValueError("distance matrix contains non-finite entries")
        if np.any(d < 0):
            raise ValueError("distances must be nonnegative")
        if np.any(np.abs(d - d.T) > 1e-12):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "entries", d)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def grid_contiguity(rows: int, cols: int, kind: str = "rook") -> WeightMatrix:
    """
    Binary contiguity on a ``rows x cols`` lattice, nodes in row-major order.

    ``kind`` is ``"rook"`` (shared edge) or ``"queen"`` (shared edge or
    corner).  The result is not standardized.
    """
    kind = kind.lower()
    if kind not in ("rook", "queen"):
        raise ValueError(f"unknown contiguity kind {kind!r}")
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("lattice needs at least two cells")
    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if kind == "queen":
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    n = rows * cols
    w = np.zeros((n, n))
    for r in range(rows):
        for c in range(cols):
            for dr, dc in offsets:
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    w[r * cols + c, rr * cols + cc] = 1.0
    return WeightMatrix(w)


def row_standardize(w) -> WeightMatrix:
    """Rescale nonzero rows to sum to one; all-zero rows stay zero."""
    m = as_matrix(w)
    sums = m.sum(axis=1, keepdims=True)
    out = np.divide(m, sums, out=np.zeros_like(m), where=sums > 0)
    return WeightMatrix(out, row_standardized=True)


def knn_weights(d, k: int) -> WeightMatrix:
    """
    k-nearest-neighbour weights: row i puts ``1/k`` on each of its own k
    nearest neighbours, so every row sums to one.

    Ties at the k-th distance go to the lowest node index.  The matrix is in
    general not symmetric.
    """
    dist = d.entries if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)
    n = dist.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    w = np.zeros((n, n))
    idx = np.arange(n)
    for i in range(n):
        others = idx[idx != i]
        # lexsort: primary key distance, secondary key index
        order = others[np.lexsort((others, dist[i, others]))]
        w[i, order[:k]] = 1.0 / k
    return WeightMatrix(w, row_standardized=True)


def _rows(p) -> np.ndarray:
    v = p.values if isinstance(p, Panel) else np.asarray(p, dtype=float)
    if np.any(~np.isfinite(v)):
        raise ValueError("panel contains NaN or Inf")
    return v


def _pairwise_euclidean(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    d = np.sqrt(np.clip(d2, 0.0, None))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def euclidean_distance(p) -> DistanceMatrix:
    """Euclidean distance between the node series (rows) of a panel."""
    x = _rows(p)
    if x.shape[1] < 2:
        raise ValueError("need at least two time points")
    diff = x[:, None, :] - x[None, :, :]
    return DistanceMatrix(np.sqrt(np.sum(diff**2, axis=2)))


def correlation_distance(p) -> DistanceMatrix:
    """Correlation distance ``sqrt(2 (1 - r_ij))`` between node series."""
    x = _rows(p)
    if x.shape[1] < 3:
        raise ValueError("need at least three time points")
    sd = x.std(axis=1)
    if np.any(sd == 0):
        raise ValueError("zero-variance series: correlation undefined")
    r = np.clip(np.corrcoef(x), -1.0, 1.0)
    d = np.sqrt(np.clip(2.0 * (1.0 - r), 0.0, None))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d)


def log_arch_coefficients(series: np.ndarray, ar_order: int) -> np.ndarray:
    """
    Least-squares fit of ``ln y_t^2`` on a constant and its first
    ``ar_order`` lags.  Returns the slope coefficients only.
    """
    z = np.log(np.asarray(series, dtype=float) ** 2)
    t = z.shape[0]
    lags = [z[ar_order - j - 1 : t - j - 1] for j in range(ar_order)]
    x = np.column_stack([np.ones(t - ar_order)] + lags)
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise np.linalg.LinAlgError("singular log-ARCH regression design")
    beta, *_ = np.linalg.lstsq(x, z[ar_order:], rcond=None)
    return beta[1:]


def piccolo_distance(p, ar_order: int = 1) -> DistanceMatrix:
    """
    Euclidean distance between fitted log-ARCH(``ar_order``) slope vectors.

    Series must not contain zeros (replace them upstream).
    """
    x = _rows(p)
    if ar_order < 1:
        raise ValueError("ar_order must be >= 1")
    if x.shape[1] < 10 * ar_order:
        raise ValueError("need at least 10 * ar_order time points")
    if np.any(x == 0):
        raise ValueError("zero observations: log-ARCH fit undefined")
    coefs = np.vstack([log_arch_coefficients(row, ar_order) for row in x])
    return DistanceMatrix(_pairwise_euclidean(coefs))
