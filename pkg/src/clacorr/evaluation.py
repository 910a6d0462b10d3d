"""Error metrics, replicate benchmarks, error surfaces and concordance."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from clacorr.core_stats import TimeSeriesMatrix, pairwise_correlations, u_scores
from clacorr.errors import ConfigError, ShapeError, ZeroVariance
from clacorr.estimators import EstimateSet, correlate_groups, estimate_ac, estimate_ca
from clacorr.synthetic import ScenarioSpec, replicate_rng, sample_scenario
from clacorr.ward import (
    Clustering,
    cut_dendrogram,
    h_max,
    kmeans_clusters,
    random_clusters,
    select_height_silhouette,
    ward_dendrogram,
)

log = logging.getLogger(__name__)

ESTIMATORS = ("ac", "ca", "cla")
CLUSTERINGS = ("ward", "kmeans", "random")
SURFACE_GRID = 25


@dataclass(frozen=True, eq=False)
class BenchmarkResult:
    scenario: ScenarioSpec
    method: str
    se: np.ndarray
    mse: float
    sd: float

    @classmethod
    def from_errors(cls, scenario, method, se) -> BenchmarkResult:
        se = np.asarray(se, dtype=np.float64)
        sd = float(se.std(ddof=1)) if len(se) > 1 else 0.0
        return cls(scenario, method, se, float(se.mean()), sd)


@dataclass(frozen=True, eq=False)
class ErrorSurface:
    """Cluster-level error on a grid of cut heights.

    ``errors[i, j]`` is the error at ``(heights_a[i], heights_b[j])``.
    """

    heights_a: np.ndarray
    heights_b: np.ndarray
    errors: np.ndarray
    hmax_point: tuple[float, float, float]
    argmin_point: tuple[float, float, float]

    def triples(self):
        for i, ha in enumerate(self.heights_a):
            for j, hb in enumerate(self.heights_b):
                yield float(ha), float(hb), float(self.errors[i, j])


def cluster_level_error(est: EstimateSet | np.ndarray, rho_true: float) -> float:
    """Mean squared deviation of the cluster-pair correlations from ``rho_true``."""
    r = est.cluster_matrix if isinstance(est, EstimateSet) else np.asarray(est, dtype=np.float64)
    if r.size == 0:
        raise ShapeError("empty estimate set")
    return float(np.mean((r - rho_true) ** 2))


def concordance_ccc(x, y) -> float:
    """Lin's concordance correlation coefficient with 1/n moments."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
        raise ShapeError("CCC needs two 1-D vectors of equal length >= 2")
    mx, my = x.mean(), y.mean()
    vx = np.mean((x - mx) ** 2)
    vy = np.mean((y - my) ** 2)
    if vx == 0 or vy == 0:
        raise ZeroVariance("CCC undefined for a constant vector", ident=0 if vx == 0 else 1)
    cov = np.mean((x - mx) * (y - my))
    return float(2.0 * cov / (vx + vy + (mx - my) ** 2))


# -- height rules -------------------------------------------------------------

def parse_height_rule(rule: str) -> tuple[str, float | None]:
    """``maxu``, ``silhouette`` or ``fixed:<h>`` -> (kind, value)."""
    rule = rule.strip().lower()
    if rule in ("maxu", "silhouette"):
        return rule, None
    if rule.startswith("fixed:"):
        try:
            h = float(rule.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad fixed height in {rule!r}") from None
        if not h >= 0:
            raise ConfigError(f"fixed height must be >= 0, got {h}")
        return "fixed", h
    raise ConfigError(f"unknown height rule {rule!r}; use maxu, silhouette or fixed:<h>")


def cluster_region(ts: TimeSeriesMatrix, rule: str) -> tuple[Clustering, float]:
    """Ward-cluster one region under a height rule; returns (clustering, h_max)."""
    kind, value = parse_height_rule(rule)
    corr = pairwise_correlations(ts, ts)
    hm = h_max(corr)
    dend = ward_dendrogram(corr)
    if kind == "silhouette":
        _, clustering = select_height_silhouette(dend, corr, region_id=ts.region_id)
    else:
        h = hm if kind == "maxu" else value
        clustering = cut_dendrogram(dend, h, region_id=ts.region_id)
    return clustering, hm


# -- benchmark ----------------------------------------------------------------

def method_label(estimator: str, clustering: str = "ward", rule: str = "maxu") -> str:
    if estimator != "cla":
        return estimator.upper()
    return f"CLA/{clustering}/{rule}"


def _replicate_errors(spec: ScenarioSpec, rep: int, estimators, rules, clusterings) -> dict:
    a, b = sample_scenario(spec, rep)
    out = {}
    if "ac" in estimators:
        out["AC"] = (estimate_ac(a, b) - spec.rho) ** 2
    if "ca" in estimators:
        out["CA"] = (estimate_ca(a, b) - spec.rho) ** 2
    if "cla" not in estimators:
        return out
    for rule in rules:
        ward = [cluster_region(ts, rule)[0] for ts in (a, b)]
        for method in clusterings:
            if method == "ward":
                cs = ward
            elif method == "kmeans":
                # k taken from the Ward partition of the same region
                cs = [
                    kmeans_clusters(u_scores(ts), w.n_clusters,
                                    seed=replicate_rng(spec.seed, rep, 1 + idx),
                                    region_id=ts.region_id)
                    for idx, (ts, w) in enumerate(zip((a, b), ward))
                ]
            elif method == "random":
                cs = [
                    random_clusters(ts.voxel_ids, w.n_clusters,
                                    seed=replicate_rng(spec.seed, rep, 3 + idx),
                                    region_id=ts.region_id)
                    for idx, (ts, w) in enumerate(zip((a, b), ward))
                ]
            else:
                raise ConfigError(f"unknown clustering method {method!r}")
            r = correlate_groups(a, cs[0].groups(), b, cs[1].groups())
            out[method_label("cla", method, rule)] = (float(r.mean()) - spec.rho) ** 2
    return out


def run_benchmark(spec: ScenarioSpec, methods=ESTIMATORS, height_rules=("maxu",),
                  clusterings=("ward",), threads: int = 1) -> list[BenchmarkResult]:
    """Squared error of each regional point estimate over ``spec.replicates`` draws.

    Replicate ``i`` always uses the random stream ``(spec.seed, i)``, so the
    result does not depend on ``threads``.
    """
    methods = tuple(m.lower() for m in methods)
    for m in methods:
        if m not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {m!r}; expected one of {ESTIMATORS}")
    for c in clusterings:
        if c not in CLUSTERINGS:
            raise ConfigError(f"unknown clustering method {c!r}; expected one of {CLUSTERINGS}")
    for rule in height_rules:
        parse_height_rule(rule)

    def job(rep):
        return _replicate_errors(spec, rep, methods, height_rules, clusterings)

    reps = range(spec.replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(job, reps))
    else:
        per_rep = [job(r) for r in reps]
    labels = list(per_rep[0])
    return [BenchmarkResult.from_errors(spec, lab, [e[lab] for e in per_rep]) for lab in labels]


# -- error surface ------------------------------------------------------------

def error_surface(a: TimeSeriesMatrix, b: TimeSeriesMatrix, rho_true: float,
                  grid=None, n_grid: int = SURFACE_GRID) -> ErrorSurface:
    """Cluster-level error over a grid of cut heights for both regions.

    Args:
        grid: optional ``(heights_a, heights_b)``; by default ``n_grid``
            uniform points on ``[0, root height]`` for each region.
    """
    dends, hmaxes = [], []
    for ts in (a, b):
        corr = pairwise_correlations(ts, ts)
        dends.append(ward_dendrogram(corr))
        hmaxes.append(h_max(corr))
    if grid is None:
        grid = [np.linspace(0.0, d.root_height, n_grid) for d in dends]
    ha, hb = (np.asarray(g, dtype=np.float64) for g in grid)
    if ha.size == 0 or hb.size == 0:
        raise ShapeError("empty height grid")

    ga = [cut_dendrogram(dends[0], h).groups() for h in ha]
    gb = [cut_dendrogram(dends[1], h).groups() for h in hb]
    errors = np.empty((len(ha), len(hb)))
    for i, gi in enumerate(ga):
        for j, gj in enumerate(gb):
            errors[i, j] = cluster_level_error(correlate_groups(a, gi, b, gj), rho_true)

    hm_err = cluster_level_error(
        correlate_groups(a, cut_dendrogram(dends[0], hmaxes[0]).groups(),
                         b, cut_dendrogram(dends[1], hmaxes[1]).groups()),
        rho_true,
    )
    i, j = np.unravel_index(int(np.argmin(errors)), errors.shape)
    return ErrorSurface(ha, hb, errors, (hmaxes[0], hmaxes[1], hm_err),
                        (float(ha[i]), float(hb[j]), float(errors[i, j])))
