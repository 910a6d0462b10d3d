"""Ward agglomerative clustering in U-score space and flat-clustering baselines.

Everything here works from the intra-regional correlation matrix: the squared
U-score distance between voxels i and j is ``2 (1 - r_ij)``, so the U-scores
themselves never need to be formed (k-means is the exception).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from clacorr.core_stats import CorrelationMatrix, UScoreMatrix, squared_distances
from clacorr.errors import DegenerateClustering, DomainError, ShapeError

SILHOUETTE_MAX_K = 50
KMEANS_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Merge history of an agglomeration over ``N`` leaves.

    Node ids follow the usual convention: leaves are ``0..N-1`` and the node
    created by merge ``s`` is ``N + s``.  ``left < right`` for every merge.
    """

    leaves: tuple
    left: np.ndarray
    right: np.ndarray
    heights: np.ndarray
    sizes: np.ndarray

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def merges(self) -> list[tuple[int, int, float, int]]:
        return [
            (int(l), int(r), float(h), int(s))
            for l, r, h, s in zip(self.left, self.right, self.heights, self.sizes)
        ]

    @property
    def root_height(self) -> float:
        return float(self.heights[-1]) if len(self.heights) else 0.0

    def to_linkage(self) -> np.ndarray:
        """Merge table in the ``scipy.cluster.hierarchy`` linkage layout."""
        return np.column_stack([self.left, self.right, self.heights, self.sizes]).astype(float)


@dataclass(frozen=True, eq=False)
class Clustering:
    """Flat partition of one region's voxels.

    ``cut_height`` is None when the partition was produced with a fixed number
    of clusters (k-means, random assignment) rather than a dendrogram cut.
    """

    region_id: Hashable
    voxel_ids: tuple
    labels: np.ndarray
    cut_height: float | None = None
    method: str = "ward"
    _groups: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.intp).copy()
        labels.setflags(write=False)
        if labels.shape != (len(self.voxel_ids),):
            raise ShapeError("one label per voxel required")
        n = int(labels.max()) + 1 if labels.size else 0
        if labels.size and (labels.min() < 0 or len(np.unique(labels)) != n):
            raise ShapeError("cluster ids must be contiguous from 0")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "voxel_ids", tuple(self.voxel_ids))
        object.__setattr__(self, "_groups", [np.flatnonzero(labels == c) for c in range(n)])

    @property
    def n_clusters(self) -> int:
        return len(self._groups)

    @property
    def assignments(self) -> dict:
        return dict(zip(self.voxel_ids, self.labels.tolist()))

    def groups(self) -> list[np.ndarray]:
        """Row indices of each cluster, ordered by cluster id."""
        return self._groups

    def sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self._groups])


def relabel_by_first_appearance(labels) -> np.ndarray:
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    mapping = np.empty(len(order), dtype=np.intp)
    mapping[order] = np.arange(len(order))
    return mapping[np.unique(labels, return_inverse=True)[1]]


def _as_square_corr(corr) -> tuple[tuple, np.ndarray]:
    if isinstance(corr, CorrelationMatrix):
        ids, r = corr.row_ids, corr.entries
        if corr.row_ids != corr.col_ids:
            raise ShapeError("intra-regional correlation matrix expected (row_ids != col_ids)")
    else:
        r = np.asarray(corr, dtype=np.float64)
        ids = tuple(range(r.shape[0])) if r.ndim == 2 else ()
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ShapeError(f"square correlation matrix expected, got shape {r.shape}")
    if not np.allclose(r, r.T, rtol=0.0, atol=1e-10):
        raise DomainError("correlation matrix is not symmetric")
    return ids, r


def ward_dendrogram(corr) -> Dendrogram:
    """Ward agglomeration driven by the Lance-Williams recurrence.

    Squared distances start at ``2 (1 - r_ij)``.  Merge heights are on the
    Ward distance scale ``sqrt(2 |a||b| / (|a|+|b|)) * ||centroid_a - centroid_b||``,
    which reduces to the plain U-score distance for two singletons.  Exact
    ties go to the lexicographically smallest (left node, right node) pair.

    Args:
        corr: Intra-regional ``CorrelationMatrix`` or square array.
    """
    ids, r = _as_square_corr(corr)
    n = r.shape[0]
    d2 = squared_distances(r).copy()
    np.fill_diagonal(d2, np.inf)

    node = np.arange(n)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    left = np.empty(n - 1, dtype=np.intp)
    right = np.empty(n - 1, dtype=np.intp)
    heights = np.empty(n - 1)
    sizes = np.empty(n - 1, dtype=np.intp)

    for step in range(n - 1):
        flat = int(np.argmin(d2))
        best = d2.flat[flat]
        ties = np.flatnonzero(d2 == best)
        if len(ties) > 2:
            pairs = sorted(
                (min(node[t // n], node[t % n]), max(node[t // n], node[t % n]), t) for t in ties
            )
            flat = pairs[0][2]
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        ni, nj = size[i], size[j]
        others = active.copy()
        others[[i, j]] = False
        nk = size[others]
        new_row = ((ni + nk) * d2[i, others] + (nj + nk) * d2[j, others] - nk * best) / (ni + nj + nk)
        a, b = sorted((int(node[i]), int(node[j])))
        left[step], right[step] = a, b
        heights[step] = np.sqrt(max(best, 0.0))
        sizes[step] = int(ni + nj)

        # merged cluster lives in slot i, slot j is retired
        d2[i, others] = new_row
        d2[others, i] = new_row
        d2[j, :] = np.inf
        d2[:, j] = np.inf
        active[j] = False
        size[i] = ni + nj
        node[i] = n + step

    # Ward is reducible, so heights are monotone up to last-bit rounding
    heights = np.maximum.accumulate(heights) if n > 1 else heights
    return Dendrogram(tuple(ids), left, right, heights, sizes)


def _labels_after_merges(d: Dendrogram, n_merges: int) -> np.ndarray:
    n = d.n_leaves
    parent = np.arange(2 * n - 1)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s in range(n_merges):
        parent[find(d.left[s])] = n + s
        parent[find(d.right[s])] = n + s
    roots = np.array([find(i) for i in range(n)])
    return relabel_by_first_appearance(roots)


def cut_dendrogram(d: Dendrogram, h: float, region_id=None) -> Clustering:
    """Flat clusters keeping every merge with height ``<= h``."""
    if h < 0:
        raise DomainError("cut height must be non-negative")
    n_merges = int(np.searchsorted(d.heights, h, side="right"))
    return Clustering(region_id, d.leaves, _labels_after_merges(d, n_merges), float(h))


def cut_to_k(d: Dendrogram, k: int, region_id=None) -> Clustering:
    """Flat clusters obtained by stopping the agglomeration at ``k`` clusters.

    The recorded cut height is that of the last merge applied (0 for ``k = N``).
    """
    n = d.n_leaves
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, {n}], got {k}")
    n_merges = n - k
    h = float(d.heights[n_merges - 1]) if n_merges else 0.0
    return Clustering(region_id, d.leaves, _labels_after_merges(d, n_merges), h)


def h_max(corr) -> float:
    """Largest U-score distance within a region, ``sqrt(2 (1 - min r))``."""
    _, r = _as_square_corr(corr)
    if r.shape[0] < 2:
        return 0.0
    off = r[~np.eye(r.shape[0], dtype=bool)]
    return float(np.sqrt(2.0 * (1.0 - max(-1.0, min(1.0, off.min())))))


def silhouette(dist: np.ndarray, labels) -> float:
    """Mean silhouette width from a precomputed distance matrix.

    Points in singleton clusters score 0.
    """
    labels = np.asarray(labels)
    n = len(labels)
    k = int(labels.max()) + 1
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    counts = onehot.sum(axis=0)
    sums = dist @ onehot
    own = counts[labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = sums[np.arange(n), labels] / (own - 1)
        mean_to = sums / counts
    mean_to[np.arange(n), labels] = np.inf
    b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def select_height_silhouette(d: Dendrogram, corr, k_range: Sequence[int] | None = None,
                             region_id=None, tol: float = 1e-12) -> tuple[float, Clustering]:
    """Pick the dendrogram cut with the largest mean silhouette.

    Candidate cuts are indexed by their number of clusters ``k``; scores within
    ``tol`` of the best count as ties and resolve to the smallest ``k``.

    Raises:
        DegenerateClustering: when no candidate ``k`` admits a silhouette.
    """
    _, r = _as_square_corr(corr)
    n = r.shape[0]
    if k_range is None:
        k_range = range(2, min(n - 1, SILHOUETTE_MAX_K) + 1)
    ks = [k for k in k_range if 2 <= k <= n - 1]
    if not ks:
        raise DegenerateClustering(f"no admissible cluster count for silhouette with N={n}")
    dist = np.sqrt(squared_distances(r))
    scored = []
    for k in ks:
        c = cut_to_k(d, k, region_id)
        scored.append((silhouette(dist, c.labels), k, c))
    best = max(s for s, _, _ in scored)
    _, k, c = min((t for t in scored if t[0] >= best - tol), key=lambda t: t[1])
    clustering = Clustering(region_id, c.voxel_ids, c.labels, c.cut_height, "silhouette")
    return c.cut_height, clustering


def _farthest_point_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(len(x)))]
    dmin = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[chosen].copy()


def kmeans_clusters(u, k: int, seed=0, region_id=None, max_iter: int = KMEANS_MAX_ITER) -> Clustering:
    """Lloyd's k-means on U-score rows with a seeded farthest-point start.

    The seed only picks the first centre; the remaining ``k - 1`` are chosen
    greedily as the point farthest from the centres so far.
    """
    if isinstance(u, UScoreMatrix):
        ids, x = u.voxel_ids, u.scores
    else:
        x = np.asarray(u, dtype=np.float64)
        ids = tuple(range(len(x)))
    n = len(x)
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centres = _farthest_point_init(x, k, rng)
    labels = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # refill an empty cluster with the worst-fitted point of a shared cluster
            fit = d2[np.arange(n), new]
            fit[counts[new] <= 1] = -np.inf
            p = int(np.argmax(fit))
            counts[new[p]] -= 1
            new[p] = c
            counts[c] = 1
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centres[c] = x[labels == c].mean(axis=0)
    return Clustering(region_id, ids, relabel_by_first_appearance(labels), None, "kmeans")


def _log_stirling2(n: int, k: int) -> np.ndarray:
    """Table of log S(m, j) for m <= n, j <= k (Stirling numbers of the 2nd kind)."""
    table = np.full((n + 1, k + 1), -np.inf)
    table[0, 0] = 0.0
    j = np.arange(1, k + 1)
    for m in range(1, n + 1):
        table[m, 1:] = np.logaddexp(np.log(j) + table[m - 1, 1:], table[m - 1, :-1])
    return table


def random_clusters(voxel_ids: Sequence, k: int, seed=0, region_id=None) -> Clustering:
    """Uniformly random surjective assignment of voxels to ``k`` clusters.

    Drawn exactly from the uniform law over surjections by peeling one voxel
    at a time with Stirling-number weights.
    """
    ids = tuple(voxel_ids)
    n = len(ids)
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    logs = _log_stirling2(n, k)
    labels = np.empty(n, dtype=np.intp)
    free = list(range(k))
    m = n
    while m > 0:
        kk = len(free)
        if kk == m:
            labels[:m] = rng.permutation(free)
            break
        p_shared = np.exp(np.log(kk) + logs[m - 1, kk] - logs[m, kk])
        pick = int(rng.integers(kk))
        labels[m - 1] = free[pick]
        if rng.random() >= p_shared:
            free.pop(pick)
        m -= 1
    return Clustering(region_id, ids, relabel_by_first_appearance(labels), None, "random")
