"""Sample correlation, pairwise correlation matrices and U-score geometry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from clacorr.errors import DomainError, ShapeError, ZeroVariance

# Relative threshold below which a centered series counts as constant.
ZERO_VARIANCE_RTOL = 1e-14
# Slack allowed on correlations that drift outside [-1, 1] through rounding.
CORR_SLACK = 1e-12


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeriesMatrix:
    """Observed samples of one region, one row per voxel.

    Attributes:
        region_id: Region label.
        voxel_ids: Identifiers aligned with the rows of ``values``.
        values: ``(N, n)`` array, N voxels by n time points.
    """

    region_id: Hashable
    voxel_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise ShapeError(f"region {self.region_id!r}: values must be 2-D, got ndim={values.ndim}")
        ids = tuple(self.voxel_ids)
        n_vox, n_time = values.shape
        if n_vox < 1:
            raise ShapeError(f"region {self.region_id!r}: needs at least one voxel")
        if n_time < 3:
            raise ShapeError(f"region {self.region_id!r}: needs n >= 3 time points, got {n_time}")
        if len(ids) != n_vox:
            raise ShapeError(
                f"region {self.region_id!r}: {len(ids)} voxel ids for {n_vox} rows"
            )
        if len(set(ids)) != len(ids):
            raise ShapeError(f"region {self.region_id!r}: duplicate voxel ids")
        if not np.all(np.isfinite(values)):
            row = int(np.argwhere(~np.isfinite(values))[0, 0])
            raise ShapeError(f"region {self.region_id!r}: non-finite value for voxel {ids[row]!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "voxel_ids", ids)

    @classmethod
    def from_array(cls, values, region_id="A", voxel_ids=None) -> TimeSeriesMatrix:
        values = np.asarray(values, dtype=np.float64)
        if voxel_ids is None:
            voxel_ids = [f"{region_id}{i}" for i in range(values.shape[0])]
        return cls(region_id, tuple(voxel_ids), values)

    @property
    def n_voxels(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    def subset(self, rows: Sequence[int]) -> TimeSeriesMatrix:
        rows = list(rows)
        return TimeSeriesMatrix(
            self.region_id, tuple(self.voxel_ids[i] for i in rows), self.values[rows]
        )


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    row_ids: tuple
    col_ids: tuple
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.shape != (len(self.row_ids), len(self.col_ids)):
            raise ShapeError(
                f"entries shape {entries.shape} does not match ids "
                f"({len(self.row_ids)}, {len(self.col_ids)})"
            )
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_ids", tuple(self.col_ids))

    @property
    def is_square(self) -> bool:
        return self.row_ids == self.col_ids


@dataclass(frozen=True, eq=False)
class UScoreMatrix:
    voxel_ids: tuple
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scores", _frozen(self.scores))
        object.__setattr__(self, "voxel_ids", tuple(self.voxel_ids))


def _center(values: np.ndarray) -> np.ndarray:
    """Two-pass centering along the last axis."""
    centered = values - values.mean(axis=-1, keepdims=True)
    # second pass removes the rounding residue of the first mean
    centered -= centered.mean(axis=-1, keepdims=True)
    return centered


def normalized_rows(values: np.ndarray, ids: Sequence | None = None) -> np.ndarray:
    """Center each row and scale it to unit Euclidean norm.

    Raises:
        ZeroVariance: if a row is constant; the offending id is attached.
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    centered = _center(values)
    c_norm = np.linalg.norm(centered, axis=1)
    raw_norm = np.linalg.norm(values, axis=1)
    bad = c_norm <= ZERO_VARIANCE_RTOL * raw_norm
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        ident = ids[row] if ids is not None else row
        raise ZeroVariance(f"constant series for {ident!r}", ident=ident)
    return centered / c_norm[:, None]


def sample_correlation(a, b) -> float:
    """Pearson correlation of two equal-length vectors (1/n moment convention).

    >>> round(sample_correlation([1, 2, 3], [3, 2, 1]), 12)
    -1.0
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"vectors must be 1-D with equal length, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ShapeError("need at least two samples")
    ac = _center(a)
    bc = _center(b)
    na, nb = np.linalg.norm(ac), np.linalg.norm(bc)
    if na <= ZERO_VARIANCE_RTOL * np.linalg.norm(a):
        raise ZeroVariance("first argument is constant", ident=0)
    if nb <= ZERO_VARIANCE_RTOL * np.linalg.norm(b):
        raise ZeroVariance("second argument is constant", ident=1)
    r = float(np.dot(ac, bc) / (na * nb))
    return min(1.0, max(-1.0, r))


def correlate_rows(x: np.ndarray, y: np.ndarray, x_ids=None, y_ids=None) -> np.ndarray:
    """Correlation between every row of ``x`` and every row of ``y``."""
    if x.shape[-1] != y.shape[-1]:
        raise ShapeError(f"time lengths differ: {x.shape[-1]} vs {y.shape[-1]}")
    ux = normalized_rows(x, x_ids)
    uy = ux if y is x else normalized_rows(y, y_ids)
    out = ux @ uy.T
    if y is x:
        out = 0.5 * (out + out.T)
        np.fill_diagonal(out, 1.0)
    return np.clip(out, -1.0, 1.0)


def pairwise_correlations(a: TimeSeriesMatrix, b: TimeSeriesMatrix) -> CorrelationMatrix:
    """Sample correlations between every voxel of ``a`` and every voxel of ``b``.

    Passing the same object twice yields the intra-regional matrix, which is
    returned exactly symmetric with a unit diagonal.
    """
    if a.n_times != b.n_times:
        raise ShapeError(f"regions have different lengths: {a.n_times} vs {b.n_times}")
    if a is b:
        entries = correlate_rows(a.values, a.values, a.voxel_ids, a.voxel_ids)
    else:
        entries = correlate_rows(a.values, b.values, a.voxel_ids, b.voxel_ids)
    return CorrelationMatrix(a.voxel_ids, b.voxel_ids, entries)


def helmert_transform(z: np.ndarray) -> np.ndarray:
    """Project rows of ``z`` onto the Helmert basis of the complement of 1.

    Row k (1-based) of the basis is ``(1, ..., 1, -k, 0, ..., 0) / sqrt(k(k+1))``
    with k leading ones.  Evaluated with cumulative sums, so no n x n matrix
    is formed.
    """
    z = np.atleast_2d(z)
    n = z.shape[1]
    k = np.arange(1, n, dtype=np.float64)
    partial = np.cumsum(z, axis=1)[:, :-1]
    return (partial - k * z[:, 1:]) / np.sqrt(k * (k + 1.0))


def u_scores(a: TimeSeriesMatrix) -> UScoreMatrix:
    """Unit vectors in R^(n-1) whose inner products are the sample correlations."""
    z = normalized_rows(a.values, a.voxel_ids)
    scores = helmert_transform(z)
    # rows are unit-norm up to rounding; renormalise to pin the identity
    scores /= np.linalg.norm(scores, axis=1, keepdims=True)
    return UScoreMatrix(a.voxel_ids, scores)


def _check_corr_domain(r: np.ndarray) -> None:
    if np.any(np.isnan(r)) or np.any(r < -1.0 - CORR_SLACK) or np.any(r > 1.0 + CORR_SLACK):
        raise DomainError("correlation outside [-1, 1]")


def correlation_to_distance(r):
    """U-score distance ``sqrt(2 (1 - r))`` for a correlation or an array of them."""
    arr = np.asarray(r, dtype=np.float64)
    _check_corr_domain(arr)
    d = np.sqrt(2.0 * (1.0 - np.clip(arr, -1.0, 1.0)))
    return float(d) if d.ndim == 0 else d


def squared_distances(corr: np.ndarray) -> np.ndarray:
    """Squared U-score distances ``2 (1 - r)`` with an exact zero diagonal."""
    corr = np.asarray(corr, dtype=np.float64)
    _check_corr_domain(corr)
    d2 = 2.0 * (1.0 - np.clip(corr, -1.0, 1.0))
    if corr.ndim == 2 and corr.shape[0] == corr.shape[1]:
        np.fill_diagonal(d2, 0.0)
    return d2
