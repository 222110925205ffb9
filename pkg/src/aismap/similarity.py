"""Correlation kernels, condensed pairwise-similarity vectors, and the
second-order isomorphism statistic.

Vectors of pairwise similarities use the canonical strict-upper-triangle
row-major ordering: pair (i, j) with i < j sits at index
``i*n - i*(i+1)/2 + (j - i - 1)``.

Degenerate inputs (constant vectors) make rank and product-moment
correlations undefined; the kernels return 0 together with a flag instead
of raising, because masked embeddings can legitimately collapse and a
512-sweep should record the collapse rather than abort.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DomainError, MaskTooSmall, OrderError, ShapeError, ZeroVectorError

METRICS = ("spearman", "pearson", "cosine")


class CorrResult(NamedTuple):
    value: float
    degenerate: bool


def condensed_size(n: int) -> int:
    return n * (n - 1) // 2


def condensed_index(i: int, j: int, n: int) -> int:
    """Index of pair (i, j), i < j, in the condensed upper-triangle vector."""
    if not 0 <= i < n and 0 <= j < n:
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")
    if i >= j:
        raise OrderError(f"condensed pairs require i < j, got ({i}, {j})")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def n_from_condensed(length: int) -> int:
    """Number of items n such that n*(n-1)/2 == length."""
    n = int(round((1 + np.sqrt(1 + 8 * length)) / 2))
    if condensed_size(n) != length:
        raise ShapeError(f"{length} is not a condensed-vector length")
    return n


def condense(matrix: np.ndarray) -> np.ndarray:
    """Strict upper triangle of a square matrix in canonical pair order."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError("expected a square matrix", got=matrix.shape)
    iu = np.triu_indices(matrix.shape[0], k=1)
    return matrix[iu]


def rank_average(x: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based); tied values share their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    boundary = np.empty(len(x) + 1, dtype=bool)
    boundary[0] = boundary[-1] = True
    boundary[1:-1] = sx[1:] != sx[:-1]
    edges = np.flatnonzero(boundary)
    starts, ends = edges[:-1], edges[1:]
    # average of natural ranks start+1 .. end
    run_ranks = 0.5 * (starts + ends + 1)
    ranks_sorted = np.repeat(run_ranks, ends - starts)
    out = np.empty(len(x), dtype=np.float64)
    out[order] = ranks_sorted
    return out


def _check_pair(x: np.ndarray, y: np.ndarray, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError("vector length mismatch", expected=x.shape, got=y.shape)
    if len(x) < min_len:
        raise ShapeError(f"need at least {min_len} entries, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("correlation inputs must be finite")
    return x, y


def pearson_flagged(x: np.ndarray, y: np.ndarray) -> CorrResult:
    """Product-moment correlation; constant input gives (0, degenerate)."""
    x, y = _check_pair(x, y, 2)
    if np.all(x == x[0]) or np.all(y == y[0]):
        return CorrResult(0.0, True)
    cx = x - x.mean()
    cy = y - y.mean()
    vx = float(cx @ cx)
    vy = float(cy @ cy)
    # A spread below one ulp of the mean centers to exactly zero; that is
    # constant for every observable purpose, so flag it rather than divide.
    if vx == 0.0 or vy == 0.0:
        return CorrResult(0.0, True)
    r = float(cx @ cy / np.sqrt(vx * vy))
    return CorrResult(min(1.0, max(-1.0, r)), False)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    return pearson_flagged(x, y).value


def spearman_flagged(x: np.ndarray, y: np.ndarray) -> CorrResult:
    """Rank correlation with average ranks for ties; Pearson of the ranks."""
    x, y = _check_pair(x, y, 3)
    if np.all(x == x[0]) or np.all(y == y[0]):
        return CorrResult(0.0, True)
    return pearson_flagged(rank_average(x), rank_average(y))


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    return spearman_flagged(x, y).value


def cosine(x: np.ndarray, y: np.ndarray) -> float:
    """Cosine similarity; an all-zero vector is an error (a dead image)."""
    x, y = _check_pair(x, y, 1)
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ZeroVectorError(index=0 if nx == 0.0 else 1)
    return float(np.clip(x @ y / (nx * ny), -1.0, 1.0))


def normalized_rows(e: np.ndarray, metric: str) -> np.ndarray:
    """Rows transformed so that their pairwise dot products equal the
    metric: unit-normalized (cosine), centered and unit-normalized
    (pearson), or rank-transformed then centered and unit-normalized
    (spearman).  Constant rows under spearman/pearson come back all-zero;
    a zero row under cosine raises ZeroVectorError naming the first pair
    it would poison."""
    e = np.asarray(e, dtype=np.float64)
    if metric == "cosine":
        norms = np.linalg.norm(e, axis=1)
        dead = np.flatnonzero(norms == 0.0)
        if dead.size:
            i = int(dead[0])
            j = 1 if i == 0 else 0
            raise ZeroVectorError(index=i, pair=(min(i, j), max(i, j)))
        return e / norms[:, None]
    rows = e if metric == "pearson" else np.apply_along_axis(rank_average, 1, e)
    centered = rows - rows.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    u = np.zeros_like(centered)
    ok = norms > 0.0
    u[ok] = centered[ok] / norms[ok, None]
    return u


def pairwise_similarity(embeddings: np.ndarray, metric: str) -> np.ndarray:
    """Condensed vector of row-pair similarities of an embedding matrix.

    Implemented as one Gram product on normalized rows, which is
    bitwise-reproducible regardless of worker count and matches the
    per-pair kernels to floating-point accuracy.  For cosine, an all-zero
    row raises ZeroVectorError naming the first pair it would poison;
    constant rows under spearman/pearson yield 0-valued entries (the
    kernels' degenerate convention).
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2:
        raise ShapeError("embedding matrix must be 2-D", got=e.shape)
    n, d = e.shape
    if n < 2 or d < 2:
        raise ShapeError(f"need n >= 2 and d >= 2, got {e.shape}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if not np.all(np.isfinite(e)):
        raise DomainError("embeddings must be finite")

    u = normalized_rows(e, metric)
    gram = u @ u.T
    out = np.clip(gram[np.triu_indices(n, k=1)], -1.0, 1.0)
    return out


def soi(zu: np.ndarray, hu: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Second-order isomorphism: rank correlation between condensed model
    and human similarity vectors, optionally restricted to a pair subset."""
    return soi_flagged(zu, hu, mask).value


def soi_flagged(zu: np.ndarray, hu: np.ndarray, mask: np.ndarray | None = None) -> CorrResult:
    zu = np.asarray(zu, dtype=np.float64).ravel()
    hu = np.asarray(hu, dtype=np.float64).ravel()
    if zu.shape != hu.shape:
        raise ShapeError("condensed vectors differ in length",
                         expected=zu.shape, got=hu.shape)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape != zu.shape:
            raise ShapeError("mask length mismatch", expected=zu.shape, got=mask.shape)
        if int(mask.sum()) < 3:
            raise MaskTooSmall(f"mask selects {int(mask.sum())} pairs; need >= 3")
        zu = zu[mask]
        hu = hu[mask]
    elif len(zu) < 3:
        raise MaskTooSmall(f"{len(zu)} pairs; need >= 3")
    return spearman_flagged(zu, hu)


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats; 0*ln(0) taken as 0.

    The input is renormalized when its sum is within 1e-5 of 1.
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    if np.any(p < 0):
        raise DomainError("probabilities must be non-negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-5:
        raise DomainError(f"probabilities sum to {total:.8f}, not 1")
    p = p / total
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
