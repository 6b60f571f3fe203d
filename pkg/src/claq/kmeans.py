"""One-dimensional k-means for per-column codebooks.

Two solvers share the same output type: :func:`lloyd_cluster` is the
production path (k-means++ seeding, Lloyd iterations, deterministic from
an explicit seed), and :func:`exact_cluster_1d` is a dynamic-programming
solver that returns the globally optimal clustering. The DP exploits the
classical fact that optimal 1-D k-means clusters are contiguous runs of
the sorted data, so it can serve as a correctness oracle for the
iterative path.

Bit widths 2-4 are the widths the packed format stores; width 1 (two
centroids) is also accepted here because degenerate two-cluster problems
are useful in tests and diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-6
DEFAULT_ORACLE_CAP = 4096


@dataclass
class Codebook:
    """A fitted set of 2**bits centroids, sorted ascending."""

    bits: int
    centroids: np.ndarray
    wcss: float


def _check_values(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError("cannot cluster an empty value array")
    if not np.isfinite(v).all():
        raise ValidationError("non-finite values in clustering input")
    return v


def _check_bits(bits: int) -> int:
    if not 1 <= int(bits) <= 4:
        raise ValidationError(f"bit width must be in 1..4, got {bits}")
    return int(bits)


def _pad_unique(unique: np.ndarray, k: int) -> np.ndarray:
    # Fewer distinct values than clusters: cycle through the distinct
    # values until k entries exist, then sort. Every input value then sits
    # exactly on a centroid, so the fit is lossless.
    reps = -(-k // unique.size)
    return np.sort(np.tile(unique, reps)[:k])


def _nearest(values: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid per value; ties go to the lower index."""
    dist = np.abs(values[:, None] - centroids[None, :])
    return np.argmin(dist, axis=1)


def assign(values: np.ndarray, codebook: Codebook | np.ndarray) -> np.ndarray:
    """Map each value to its nearest-centroid index (argmin of |c - v|).

    Exact ties break toward the smaller index, i.e. the lower centroid.
    """
    v = _check_values(values)
    centroids = codebook.centroids if isinstance(codebook, Codebook) else np.asarray(codebook)
    return _nearest(v, np.asarray(centroids, dtype=np.float64)).astype(np.uint8)


def wcss_of(values: np.ndarray, codebook: Codebook | np.ndarray) -> float:
    """Sum of squared distances from each value to its nearest centroid."""
    v = _check_values(values)
    centroids = codebook.centroids if isinstance(codebook, Codebook) else np.asarray(codebook)
    c = np.asarray(centroids, dtype=np.float64)
    return float(np.sum(np.min((v[:, None] - c[None, :]) ** 2, axis=1)))


def _kmeanspp_seed(v: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = np.empty(k, dtype=np.float64)
    centroids[0] = v[rng.integers(v.size)]
    d2 = (v - centroids[0]) ** 2
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            pick = rng.choice(v.size, p=d2 / total)
        else:
            pick = int(np.argmax(d2))
        centroids[i] = v[pick]
        np.minimum(d2, (v - centroids[i]) ** 2, out=d2)
    return centroids


def lloyd_cluster(
    values: np.ndarray,
    bits: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> Codebook:
    """Fit 2**bits centroids with k-means++ seeding and Lloyd iterations.

    Deterministic given (values, bits, seed, max_iter, tol). Iteration
    stops when the largest centroid movement drops below ``tol``. Clusters
    that empty out are re-seeded to the point currently farthest from its
    assigned centroid, which prevents codebook collapse on skewed data.
    """
    v = _check_values(values)
    bits = _check_bits(bits)
    k = 1 << bits

    unique = np.unique(v)
    if unique.size <= k:
        return Codebook(bits=bits, centroids=_pad_unique(unique, k), wcss=0.0)

    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    centroids = _kmeanspp_seed(v, k, rng)

    for _ in range(max_iter):
        idx = _nearest(v, centroids)
        new = centroids.copy()
        counts = np.bincount(idx, minlength=k)
        sums = np.bincount(idx, weights=v, minlength=k)
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty]
        if not nonempty.all():
            # Re-seed each empty cluster to the worst-served point.
            dist = np.abs(v - centroids[idx])
            for q in np.flatnonzero(~nonempty):
                far = int(np.argmax(dist))
                new[q] = v[far]
                dist[far] = 0.0
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        if shift < tol:
            break

    centroids = np.sort(centroids)
    return Codebook(bits=bits, centroids=centroids, wcss=wcss_of(v, centroids))


def exact_cluster_1d(values: np.ndarray, bits: int, cap: int = DEFAULT_ORACLE_CAP) -> Codebook:
    """Globally optimal 1-D k-means via DP over contiguous sorted partitions.

    O(k n^2); intended as a verification oracle, hence the size cap.
    """
    v = _check_values(values)
    bits = _check_bits(bits)
    if v.size > cap:
        raise ValidationError(f"input length {v.size} exceeds the oracle cap {cap}")
    k = 1 << bits

    unique = np.unique(v)
    if unique.size <= k:
        return Codebook(bits=bits, centroids=_pad_unique(unique, k), wcss=0.0)

    s = np.sort(v)
    n = s.size
    p1 = np.concatenate([[0.0], np.cumsum(s)])
    p2 = np.concatenate([[0.0], np.cumsum(s * s)])

    def seg_cost(i: np.ndarray, j: int) -> np.ndarray:
        # WCSS of segments s[i..j] inclusive, vectorized over start index i.
        cnt = j - i + 1
        tot = p1[j + 1] - p1[i]
        return (p2[j + 1] - p2[i]) - tot * tot / cnt

    # cost[m-1][j]: best WCSS of s[0..j] split into m clusters.
    idx_all = np.arange(n)
    cnt_all = idx_all + 1.0
    prev = p2[1:] - p1[1:] * p1[1:] / cnt_all  # one-cluster costs of s[0..j]
    cut = np.zeros((k, n), dtype=np.int64)
    for m in range(2, k + 1):
        cur = np.full(n, np.inf)
        for j in range(m - 1, n):
            starts = idx_all[m - 1 : j + 1]
            cand = prev[starts - 1] + seg_cost(starts, j)
            best = int(np.argmin(cand))
            cur[j] = cand[best]
            cut[m - 1, j] = starts[best]
        prev = cur

    # Backtrack segment boundaries and take segment means as centroids.
    bounds = []
    j = n - 1
    for m in range(k, 1, -1):
        i = int(cut[m - 1, j])
        bounds.append((i, j))
        j = i - 1
    bounds.append((0, j))
    centroids = np.array([s[i : jj + 1].mean() for i, jj in reversed(bounds)])
    return Codebook(bits=bits, centroids=centroids, wcss=wcss_of(v, centroids))
