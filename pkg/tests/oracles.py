"""Independent reference computations used as test oracles.

Nothing here imports from ``clacorr``: each function re-derives its quantity
straight from the defining formula, by brute force where that is feasible.
"""

import itertools
import math

import numpy as np
from scipy.linalg import null_space


def explicit_u_scores(values):
    """U-scores through an SVD-derived basis of the complement of the ones vector."""
    values = np.asarray(values, dtype=float)
    n = values.shape[1]
    z = values - values.mean(axis=1, keepdims=True)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z @ null_space(np.ones((1, n)))


def points_with_gram(corr):
    """Unit vectors whose Gram matrix is ``corr`` (eigen factorisation)."""
    w, v = np.linalg.eigh(np.asarray(corr, dtype=float))
    return v * np.sqrt(np.clip(w, 0.0, None))


def ward_distance(points, a, b):
    """Ward distance between member lists ``a`` and ``b`` from centroids."""
    ca = points[list(a)].mean(axis=0)
    cb = points[list(b)].mean(axis=0)
    na, nb = len(a), len(b)
    return math.sqrt(2.0 * na * nb / (na + nb) * float(np.sum((ca - cb) ** 2)))


def brute_force_ward(points):
    """Exhaustive agglomeration recomputing every Ward distance at every step.

    Returns a list of (frozenset, frozenset, height) per merge, smaller node id first.
    """
    n = len(points)
    clusters = {i: (i,) for i in range(n)}
    merges = []
    for step in range(n - 1):
        best = None
        for i, j in itertools.combinations(sorted(clusters), 2):
            d = ward_distance(points, clusters[i], clusters[j])
            if best is None or d < best[0]:
                best = (d, i, j)
        d, i, j = best
        merges.append((frozenset(clusters[i]), frozenset(clusters[j]), d))
        clusters[n + step] = clusters.pop(i) + clusters.pop(j)
    return merges


def direct_pearson(a, b):
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def toeplitz_eta(n, eta_minus, width=30.0):
    return [[max(1.0 - abs(i - j) / width, eta_minus) for j in range(n)] for i in range(n)]


def direct_limit_ca(eta_a, eta_b, sigma2_a, sigma2_b, gamma2_a, gamma2_b, rho):
    """Correlation-of-averages limit by explicit double summation."""
    na, nb = len(eta_a), len(eta_b)
    sa = 0.0
    for i in range(na):
        for j in range(na):
            sa += eta_a[i][j]
    sb = 0.0
    for i in range(nb):
        for j in range(nb):
            sb += eta_b[i][j]
    fa = sa / na ** 2 + gamma2_a / (na * sigma2_a)
    fb = sb / nb ** 2 + gamma2_b / (nb * sigma2_b)
    return rho / math.sqrt(fa * fb)
