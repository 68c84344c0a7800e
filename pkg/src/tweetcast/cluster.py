"""User-level clustering: k-means with elbow selection, Ward hierarchical
clustering, and DBSCAN with k-distance epsilon selection.

K-means uses careful seeding (each further centroid drawn with probability
proportional to squared distance from the chosen ones) and best-of-restarts
by inertia; the elbow scan adds a nested restart per k that starts from the
previous k's best centroids plus the worst-served point, which makes the
inertia curve non-increasing in k. Knees are read automatically as the
maximum second difference of the curve.

Hierarchical and DBSCAN runs are capped to a subsample (the full corpus
does not fit their quadratic memory); callers pass an already-sampled
matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError

DEFAULT_SAMPLE_CAP = 2000

#: A knee only counts as confident when the clustering at the knee removes
#: at least this fraction of the k_min inertia.
KNEE_CONFIDENCE_RATIO = 0.5


class KTooLarge(DataError):
    pass


class SampleTooLarge(DataError):
    pass


@dataclass
class KmeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    distortion: float  # mean (non-squared) distance to assigned centroid
    iterations: int
    inertia_history: tuple  # post-assignment inertia per Lloyd iteration


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    x2 = (X * X).sum(axis=1)[:, None]
    c2 = (centroids * centroids).sum(axis=1)[None, :]
    return np.maximum(x2 + c2 - 2.0 * X @ centroids.T, 0.0)


def _careful_seed(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centroids[c] = X[rng.integers(n)]
            continue
        centroids[c] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((X - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float):
    history = []
    labels = np.zeros(X.shape[0], dtype=int)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _squared_distances(X, centroids)
        labels = d2.argmin(axis=1)
        # repair empty clusters by claiming the currently worst-served point
        assigned = d2[np.arange(len(labels)), labels]
        for c in range(centroids.shape[0]):
            if not np.any(labels == c):
                worst = int(np.argmax(assigned))
                labels[worst] = c
                centroids[c] = X[worst]
                assigned[worst] = 0.0
        history.append(float(assigned.sum()))
        new_centroids = np.vstack([X[labels == c].mean(axis=0) for c in range(centroids.shape[0])])
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break
    d2 = _squared_distances(X, centroids)
    labels = d2.argmin(axis=1)
    assigned = d2[np.arange(len(labels)), labels]
    inertia = float(assigned.sum())
    history.append(inertia)
    distortion = float(np.sqrt(assigned).mean())
    return centroids, labels, inertia, distortion, iterations, tuple(history)


def fit_kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 42,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_init: int = 10,
    extra_inits: Sequence[np.ndarray] = (),
) -> KmeansResult:
    """Best-of-restarts Lloyd iterations from careful seeding.

    ``extra_inits`` adds restarts from explicit starting centroids (the
    elbow scan uses this to nest solutions across k).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} rows")
    if k < 1:
        raise ValueError("k must be >= 1")
    best: KmeansResult | None = None
    seeds = np.random.SeedSequence(seed).spawn(n_init)
    starts = [_careful_seed(X, k, np.random.default_rng(seeds[r])) for r in range(n_init)]
    starts.extend(np.asarray(c, dtype=float).copy() for c in extra_inits)
    for start in starts:
        if start.shape != (k, X.shape[1]):
            raise ValueError("bad initial centroid shape")
        centroids, labels, inertia, distortion, iters, history = _lloyd(
            X, start.copy(), max_iter, tol
        )
        if best is None or inertia < best.inertia:
            best = KmeansResult(centroids, labels, inertia, distortion, iters, history)
    return best


@dataclass
class ElbowResult:
    k_values: tuple
    inertias: tuple
    distortions: tuple
    knee: int
    confident: bool
    results: dict = field(default_factory=dict, repr=False)


def knee_by_second_difference(values: Sequence[float]) -> int:
    """Index of the maximum central second difference (interior points)."""
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return 0
    d2 = v[:-2] - 2.0 * v[1:-1] + v[2:]
    return int(np.argmax(d2)) + 1


def elbow_scan(
    X: np.ndarray,
    k_range: Sequence[int] = range(1, 11),
    seed: int = 42,
    n_init: int = 10,
) -> ElbowResult:
    """Inertia/distortion curves over k with an automated knee estimate.

    The knee is the interior k maximizing the second difference of
    inertia. When no interior k removes at least half of the smallest-k
    inertia the estimate falls back to min(k_range) with
    ``confident=False`` (no real cluster structure).
    """
    X = np.asarray(X, dtype=float)
    ks = sorted(k_range)
    if not ks:
        raise ValueError("empty k_range")
    if ks[-1] > X.shape[0]:
        raise KTooLarge(f"max k {ks[-1]} exceeds {X.shape[0]} rows")
    results: dict = {}
    inertias = []
    distortions = []
    prev: KmeansResult | None = None
    for k in ks:
        extra = []
        if prev is not None and k == len(prev.centroids) + 1:
            d2 = _squared_distances(X, prev.centroids)
            worst = int(np.argmax(d2[np.arange(X.shape[0]), prev.labels]))
            extra.append(np.vstack([prev.centroids, X[worst]]))
        res = fit_kmeans(X, k, seed=seed, n_init=n_init, extra_inits=extra)
        results[k] = res
        inertias.append(res.inertia)
        distortions.append(res.distortion)
        prev = res
    knee_idx = knee_by_second_difference(inertias)
    knee = ks[knee_idx]
    confident = False
    if 0 < knee_idx < len(ks) - 1 and inertias[0] > 0:
        confident = inertias[knee_idx] / inertias[0] < KNEE_CONFIDENCE_RATIO
    if not confident:
        knee = ks[0]
    return ElbowResult(tuple(ks), tuple(inertias), tuple(distortions), knee, confident, results)


# --- hierarchical (Ward) ------------------------------------------------------


@dataclass(frozen=True)
class DendrogramMerge:
    cluster_a: int
    cluster_b: int
    distance: float
    size: int


def fit_agglomerative(
    X: np.ndarray, linkage: str = "ward", sample_cap: int = DEFAULT_SAMPLE_CAP
) -> list[DendrogramMerge]:
    """Full Ward merge list via Lance-Williams updates.

    Ward distance between singletons is half the squared Euclidean
    distance. Original rows are clusters 0..n-1; merge i creates cluster
    n+i. Ties break toward the smallest (cluster_a, cluster_b) pair.
    """
    if linkage != "ward":
        raise ValueError(f"unsupported linkage {linkage!r}")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n > sample_cap:
        raise SampleTooLarge(f"{n} rows exceed the cap of {sample_cap}; subsample first")
    if n < 2:
        raise DataError("need at least 2 rows")
    D = 0.5 * _squared_distances(X, X)
    np.fill_diagonal(D, np.inf)
    active = np.ones(n, dtype=bool)
    ids = np.arange(n)
    sizes = np.ones(n, dtype=int)
    merges: list[DendrogramMerge] = []
    for step in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], D, np.inf)
        m = masked.min()
        rows, cols = np.where(masked == m)
        pairs = [
            (min(ids[r], ids[c]), max(ids[r], ids[c]), r, c)
            for r, c in zip(rows, cols)
            if r < c
        ]
        id_a, id_b, slot_a, slot_b = min(pairs)
        new_id = n + step
        new_size = int(sizes[slot_a] + sizes[slot_b])
        merges.append(DendrogramMerge(int(id_a), int(id_b), float(m), new_size))
        # Lance-Williams Ward update into slot_a
        ni, nj = sizes[slot_a], sizes[slot_b]
        other = active.copy()
        other[[slot_a, slot_b]] = False
        nk = sizes[other]
        d_new = (
            (ni + nk) * D[slot_a, other] + (nj + nk) * D[slot_b, other] - nk * m
        ) / (ni + nj + nk)
        D[slot_a, other] = d_new
        D[other, slot_a] = d_new
        active[slot_b] = False
        sizes[slot_a] = new_size
        ids[slot_a] = new_id
        D[slot_b, :] = np.inf
        D[:, slot_b] = np.inf
    return merges


def cut_dendrogram(merges: Sequence[DendrogramMerge], n: int, k: int) -> np.ndarray:
    """Labels for k clusters: apply the first n-k merges.

    Cluster labels are assigned 0..k-1 ordered by each cluster's smallest
    original row index.
    """
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    parent = list(range(n + len(merges)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, merge in enumerate(merges[: n - k]):
        new_id = n + i
        parent[find(merge.cluster_a)] = new_id
        parent[find(merge.cluster_b)] = new_id
    roots: dict = {}
    raw = [find(i) for i in range(n)]
    labels = np.empty(n, dtype=int)
    for i, root in enumerate(raw):
        if root not in roots:
            roots[root] = len(roots)
        labels[i] = roots[root]
    return labels


# --- DBSCAN -------------------------------------------------------------------

NOISE = -1


@dataclass
class DbscanResult:
    labels: np.ndarray  # cluster ids in first-core-point order; noise = -1
    eps: float
    min_pts: int
    n_clusters: int
    core_mask: np.ndarray


def fit_dbscan(
    X: np.ndarray, eps: float, min_pts: int, sample_cap: int = DEFAULT_SAMPLE_CAP
) -> DbscanResult:
    """Density clustering by breadth-first region growth.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Cluster ids follow the order cores are first reached;
    border points join the first cluster that reaches them.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 2:
        raise ValueError("min_pts must be >= 2")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n > sample_cap:
        raise SampleTooLarge(f"{n} rows exceed the cap of {sample_cap}; subsample first")
    d2 = _squared_distances(X, X)
    within = d2 <= eps * eps
    neighbor_counts = within.sum(axis=1)
    core = neighbor_counts >= min_pts
    labels = np.full(n, NOISE, dtype=int)
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        queue = [i]
        labels[i] = cluster
        head = 0
        while head < len(queue):
            p = queue[head]
            head += 1
            if not core[p]:
                continue
            for q in np.flatnonzero(within[p]):
                if labels[q] == NOISE:
                    labels[q] = cluster
                    queue.append(int(q))
        cluster += 1
    return DbscanResult(labels, eps, min_pts, cluster, core)


def k_distance_curve(X: np.ndarray, k: int, sample_cap: int = DEFAULT_SAMPLE_CAP):
    """Sorted distances to each point's k-th nearest other point.

    Returns ``(curve, knee_index, suggested_eps)`` where the knee is the
    maximum second difference of the ascending curve, the usual manual
    elbow read automated.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n > sample_cap:
        raise SampleTooLarge(f"{n} rows exceed the cap of {sample_cap}; subsample first")
    if not 1 <= k < n:
        raise ValueError(f"k must be in [1, {n - 1}]")
    d2 = _squared_distances(X, X)
    np.fill_diagonal(d2, np.inf)
    kth = np.sqrt(np.partition(d2, k - 1, axis=1)[:, k - 1])
    curve = np.sort(kth)
    knee = knee_by_second_difference(curve)
    return curve, knee, float(curve[knee])
