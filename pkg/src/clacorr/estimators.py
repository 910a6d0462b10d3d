"""Inter-regional correlation estimators and their large-sample limits.

Three estimators are provided for a pair of distinct regions:

* AC  -- average of all voxel-to-voxel cross correlations,
* CA  -- correlation of the two regional average series,
* CLA -- correlation of cluster-average series for every cluster pair, whose
  mean is the regional point estimate.

CLA interpolates between the other two: all-singleton clusterings give AC,
one cluster per region gives CA.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from clacorr.core_stats import TimeSeriesMatrix, correlate_rows
from clacorr.errors import DomainError, ShapeError, ZeroVariance
from clacorr.ward import Clustering

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EstimateSet:
    """Estimates for one region pair.

    ``cluster_matrix[p, q]`` is the correlation between the average of cluster
    ``p`` of the first region and cluster ``q`` of the second.
    """

    region_pair: tuple[Hashable, Hashable]
    cluster_matrix: np.ndarray
    cla_point: float
    ac_point: float
    ca_point: float

    @property
    def n_clusters(self) -> tuple[int, int]:
        return self.cluster_matrix.shape

    @property
    def cluster_pair_estimates(self) -> list[tuple[int, int, float]]:
        ka, kb = self.cluster_matrix.shape
        return [(p, q, float(self.cluster_matrix[p, q])) for p in range(ka) for q in range(kb)]


@dataclass(frozen=True, eq=False)
class GroundTruthParams:
    """Population parameters of the signal-plus-noise model.

    All mappings are keyed by region label; ``rho`` is keyed by the sorted
    pair of labels.
    """

    sigma2: dict
    gamma2: dict
    intra: dict
    rho: dict

    def rho_of(self, pair) -> float:
        a, b = pair
        key = (a, b) if (a, b) in self.rho else (b, a)
        return float(self.rho[key])

    def _check(self, region) -> tuple[float, float]:
        s2 = float(self.sigma2[region])
        g2 = float(self.gamma2[region])
        if not s2 > 0:
            raise DomainError(f"signal variance of region {region!r} must be positive, got {s2}")
        if g2 < 0:
            raise DomainError(f"noise variance of region {region!r} must be non-negative, got {g2}")
        return s2, g2


def _warn_clip(r: np.ndarray, what: str) -> np.ndarray:
    if np.any(np.abs(r) > 1.0 + 1e-14):
        log.warning("%s: correlation outside [-1, 1] clamped (max |r| = %r)", what, float(np.abs(r).max()))
    return np.clip(r, -1.0, 1.0)


def _check_pair(a: TimeSeriesMatrix, b: TimeSeriesMatrix) -> None:
    if a is b or a.region_id == b.region_id:
        raise DomainError(f"estimators need two distinct regions, got {a.region_id!r} twice")
    if a.n_times != b.n_times:
        raise ShapeError(f"regions have different lengths: {a.n_times} vs {b.n_times}")


def cluster_averages(ts: TimeSeriesMatrix, groups: Sequence[np.ndarray]) -> np.ndarray:
    """Spatial average series of each group of rows, shape ``(len(groups), n)``."""
    return np.stack([ts.values[g].mean(axis=0) for g in groups])


def _groups_of(ts: TimeSeriesMatrix, clustering: Clustering) -> list[np.ndarray]:
    if tuple(clustering.voxel_ids) != ts.voxel_ids:
        if sorted(map(str, clustering.voxel_ids)) != sorted(map(str, ts.voxel_ids)):
            raise ShapeError(f"clustering does not partition the voxels of region {ts.region_id!r}")
        pos = {v: i for i, v in enumerate(ts.voxel_ids)}
        ids = clustering.voxel_ids
        return [np.array([pos[ids[i]] for i in g]) for g in clustering.groups()]
    return clustering.groups()


def _cluster_ids(region, k: int) -> list[str]:
    return [f"{region}:cluster{c}" for c in range(k)]


def correlate_groups(a: TimeSeriesMatrix, ga, b: TimeSeriesMatrix, gb) -> np.ndarray:
    """Correlation matrix between the group averages of two regions."""
    avg_a = cluster_averages(a, ga)
    avg_b = cluster_averages(b, gb)
    r = correlate_rows(avg_a, avg_b, _cluster_ids(a.region_id, len(ga)), _cluster_ids(b.region_id, len(gb)))
    return _warn_clip(r, f"{a.region_id}-{b.region_id}")


def estimate_ac(a: TimeSeriesMatrix, b: TimeSeriesMatrix) -> float:
    _check_pair(a, b)
    r = correlate_rows(a.values, b.values, a.voxel_ids, b.voxel_ids)
    return float(r.mean())


def estimate_ca(a: TimeSeriesMatrix, b: TimeSeriesMatrix) -> float:
    _check_pair(a, b)
    whole_a = [np.arange(a.n_voxels)]
    whole_b = [np.arange(b.n_voxels)]
    try:
        return float(correlate_groups(a, whole_a, b, whole_b)[0, 0])
    except ZeroVariance as exc:
        region = str(exc.ident).split(":")[0]
        raise ZeroVariance(f"regional average of {region!r} is constant", ident=region) from exc


def estimate_cla(a: TimeSeriesMatrix, b: TimeSeriesMatrix,
                 ca: Clustering, cb: Clustering) -> EstimateSet:
    """Cluster-level correlations for every cluster pair plus all point estimates."""
    _check_pair(a, b)
    r = correlate_groups(a, _groups_of(a, ca), b, _groups_of(b, cb))
    return EstimateSet(
        region_pair=(a.region_id, b.region_id),
        cluster_matrix=r,
        cla_point=float(r.mean()),
        ac_point=estimate_ac(a, b),
        ca_point=estimate_ca(a, b),
    )


# -- population limits ------------------------------------------------------

def _aggregation_factor(eta: np.ndarray, members: np.ndarray, sigma2: float, gamma2: float) -> float:
    """Variance of a group-average series relative to sigma^2."""
    members = np.asarray(members)
    m = len(members)
    block = eta[np.ix_(members, members)]
    return float(block.sum() / (m * m) + gamma2 / (m * sigma2))


def _as_groups(clusters, size: int) -> list[np.ndarray]:
    if isinstance(clusters, Clustering):
        return clusters.groups()
    groups = [np.asarray(g, dtype=np.intp) for g in clusters]
    if any(len(g) == 0 for g in groups) or any(g.min() < 0 or g.max() >= size for g in groups):
        raise ShapeError("cluster members must be non-empty and index into the region")
    return groups


def limit_cla_matrix(params: GroundTruthParams, pair, clusters_a, clusters_b) -> np.ndarray:
    """Almost-sure limit of every cluster-level estimate, for frozen clusters."""
    ra, rb = pair
    s2a, g2a = params._check(ra)
    s2b, g2b = params._check(rb)
    eta_a = np.asarray(params.intra[ra], dtype=np.float64)
    eta_b = np.asarray(params.intra[rb], dtype=np.float64)
    fa = np.array([_aggregation_factor(eta_a, g, s2a, g2a) for g in _as_groups(clusters_a, len(eta_a))])
    fb = np.array([_aggregation_factor(eta_b, g, s2b, g2b) for g in _as_groups(clusters_b, len(eta_b))])
    return params.rho_of(pair) / np.sqrt(fa[:, None] * fb[None, :])


def limit_cla(params: GroundTruthParams, pair, clusters_a, clusters_b) -> float:
    """Limit of the regional CLA point estimate (mean over cluster pairs)."""
    return float(limit_cla_matrix(params, pair, clusters_a, clusters_b).mean())


def limit_voxel(params: GroundTruthParams, pair) -> float:
    """Limit of the all-voxel-pairs average (the AC estimator).

    Every voxel pair shares the same limit ``rho / sqrt((1 + g_a/s_a)(1 + g_b/s_b))``;
    it is evaluated through the all-singleton clustering so that the
    reduction from ``limit_cla`` holds bit for bit.
    """
    ra, rb = pair
    na, nb = len(params.intra[ra]), len(params.intra[rb])
    return limit_cla(params, pair, [[i] for i in range(na)], [[j] for j in range(nb)])


def limit_ca(params: GroundTruthParams, pair, sizes=None) -> float:
    """Limit of the correlation-of-averages estimator.

    ``sizes`` restricts each region to its first ``N`` voxels; by default the
    full intra-correlation matrices are used.
    """
    ra, rb = pair
    na, nb = sizes if sizes is not None else (len(params.intra[ra]), len(params.intra[rb]))
    return limit_cla(params, pair, [np.arange(na)], [np.arange(nb)])
