"""Synthetic pairs of inter-correlated regions.

Each scenario is a pair of regions A and B.  Latent signals are jointly
Gaussian with intra-regional correlation given by a spatial kernel and a
constant inter-regional correlation; independent Gaussian noise is added per
voxel and time point.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln, kve

from clacorr.core_stats import TimeSeriesMatrix
from clacorr.errors import ConfigError, GeometryError, NotPSD
from clacorr.estimators import GroundTruthParams

MODELS = ("toeplitz1d", "matern3d", "spherical3d")
REGIONS = ("A", "B")
# widest allowed side ratio of the default lattice block
MAX_BLOCK_ASPECT = 4


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one simulation scenario.

    ``eta_minus_*`` is the Toeplitz floor, ``phi_*`` the range of the 3-D
    kernels.  ``coords_*`` optionally override the default voxel geometry.
    ``psd_rel_tol`` is the largest negative eigenvalue, relative to the
    largest one, that is still treated as rounding.
    """

    model: str = "toeplitz1d"
    n_a: int = 60
    n_b: int = 60
    n_times: int = 800
    eta_minus_a: float = 0.2
    eta_minus_b: float = 0.2
    phi_a: float = 0.6
    phi_b: float = 0.6
    kappa: float = 70.0
    toeplitz_width: float = 30.0
    sigma2_a: float = 1.0
    sigma2_b: float = 1.0
    gamma2_a: float = 0.5
    gamma2_b: float = 0.5
    rho: float = 0.3
    seed: int = 0
    replicates: int = 50
    psd_rel_tol: float = 1e-8
    coords_a: tuple | None = field(default=None, repr=False)
    coords_b: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.n_a < 1 or self.n_b < 1:
            raise ConfigError("region sizes must be >= 1")
        if self.n_times < 3:
            raise ConfigError("n_times must be >= 3")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        for name in ("sigma2_a", "sigma2_b", "gamma2_a", "gamma2_b", "psd_rel_tol"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [-1, 1]")
        if self.model != "toeplitz1d" and (self.phi_a <= 0 or self.phi_b <= 0):
            raise ConfigError("range parameters must be positive")
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        for name in ("coords_a", "coords_b"):
            c = getattr(self, name)
            if c is not None:
                object.__setattr__(self, name, tuple(tuple(float(x) for x in p) for p in c))

    def with_(self, **changes) -> ScenarioSpec:
        return replace(self, **changes)

    @property
    def label(self) -> str:
        if self.model == "toeplitz1d":
            shape = f"eta-=({self.eta_minus_a:g},{self.eta_minus_b:g})"
        else:
            shape = f"phi=({self.phi_a:g},{self.phi_b:g})"
        return f"{self.model} {shape} gamma2=({self.gamma2_a:g},{self.gamma2_b:g}) rho={self.rho:g}"


@dataclass(frozen=True, eq=False)
class VoxelGeometry:
    """Voxel positions of one region, shape ``(N, d)``; unit lattice spacing."""

    coordinates: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coordinates, dtype=np.float64))
        if len({tuple(p) for p in c}) != len(c):
            raise GeometryError("voxel coordinates must be unique")
        c.setflags(write=False)
        object.__setattr__(self, "coordinates", c)

    def distances(self) -> np.ndarray:
        diff = self.coordinates[:, None, :] - self.coordinates[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))


def lattice_block(n: int) -> tuple[int, int, int]:
    """Most compact ``x >= y >= z`` factorisation of ``n`` (5x4x3 for 60).

    Raises:
        GeometryError: if the most compact block is still longer than
            ``MAX_BLOCK_ASPECT`` times its shortest side.
    """
    best = None
    for z in range(1, round(n ** (1 / 3)) + 2):
        if n % z:
            continue
        for y in range(z, int(np.sqrt(n // z)) + 1):
            if (n // z) % y:
                continue
            x = n // (z * y)
            if x < y:
                continue
            if best is None or (x - z, x) < (best[0] - best[2], best[0]):
                best = (x, y, z)
    if best is None or best[0] > MAX_BLOCK_ASPECT * best[2]:
        raise GeometryError(f"N={n} has no compact 3-D lattice block; pass explicit coordinates")
    return best


def default_geometry(model: str, n: int, region_index: int = 0, coords=None) -> VoxelGeometry:
    """Default voxel layout.

    1-D model: indices ``0..N-1``.  3-D models: an ``x*y*z`` integer lattice
    block (see ``lattice_block``); region ``k`` is shifted by ``k * (x + 1)``
    along the first axis so regions never overlap.  ``coords`` bypasses all
    of this.
    """
    if coords is not None:
        g = VoxelGeometry(np.asarray(coords, dtype=np.float64))
        if len(g.coordinates) != n:
            raise GeometryError(f"{len(g.coordinates)} coordinates supplied for N={n}")
        return g
    if model == "toeplitz1d":
        return VoxelGeometry(np.arange(n, dtype=np.float64)[:, None])
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}")
    x, y, z = lattice_block(n)
    pts = np.array(list(itertools.product(range(x), range(y), range(z))), dtype=np.float64)
    pts[:, 0] += region_index * (x + 1)
    return VoxelGeometry(pts)


def toeplitz_correlation(geometry: VoxelGeometry, eta_minus: float, width: float = 30.0) -> np.ndarray:
    c = geometry.coordinates
    d = np.abs(c[:, None, :] - c[None, :, :]).max(axis=-1)
    return np.maximum(1.0 - d / width, eta_minus)


def matern_correlation(d, phi: float, kappa: float) -> np.ndarray:
    """Matern correlation ``(d/phi)^k K_k(d/phi) / (2^(k-1) Gamma(k))``.

    Evaluated in log space with the exponentially scaled Bessel function so
    that large smoothness values do not overflow or underflow.
    """
    x = np.asarray(d, dtype=np.float64) / phi
    out = np.ones_like(x)
    pos = x > 1e-10
    xp = x[pos]
    logk = np.log(kve(kappa, xp)) - xp
    out[pos] = np.exp((1.0 - kappa) * np.log(2.0) - gammaln(kappa) + kappa * np.log(xp) + logk)
    return np.minimum(out, 1.0)


def spherical_correlation(d, phi: float) -> np.ndarray:
    t = np.minimum(np.asarray(d, dtype=np.float64) / phi, 1.0)
    return 1.0 - 1.5 * t + 0.5 * t ** 3


def intra_correlation(spec: ScenarioSpec, region: str) -> np.ndarray:
    idx = REGIONS.index(region)
    suffix = region.lower()
    n = getattr(spec, f"n_{suffix}")
    geom = default_geometry(spec.model, n, idx, getattr(spec, f"coords_{suffix}"))
    if spec.model == "toeplitz1d":
        eta = toeplitz_correlation(geom, getattr(spec, f"eta_minus_{suffix}"), spec.toeplitz_width)
    elif spec.model == "matern3d":
        eta = matern_correlation(geom.distances(), getattr(spec, f"phi_{suffix}"), spec.kappa)
    else:
        eta = spherical_correlation(geom.distances(), getattr(spec, f"phi_{suffix}"))
    eta = 0.5 * (eta + eta.T)
    np.fill_diagonal(eta, 1.0)
    return eta


def build_covariance(spec: ScenarioSpec) -> tuple[np.ndarray, GroundTruthParams]:
    """Latent joint covariance (A block first) and matching ground truth.

    Raises:
        NotPSD: if the most negative eigenvalue is below
            ``-spec.psd_rel_tol * largest eigenvalue`` (and below -1e-10).
    """
    eta_a = intra_correlation(spec, "A")
    eta_b = intra_correlation(spec, "B")
    sa, sb = np.sqrt(spec.sigma2_a), np.sqrt(spec.sigma2_b)
    cross = np.full((spec.n_a, spec.n_b), spec.rho * sa * sb)
    cov = np.block([[spec.sigma2_a * eta_a, cross], [cross.T, spec.sigma2_b * eta_b]])
    eig = np.linalg.eigvalsh(cov)
    tol = max(1e-10, spec.psd_rel_tol * max(eig[-1], 0.0))
    if eig[0] < -tol:
        raise NotPSD(
            f"covariance for scenario [{spec.label}] is not PSD: "
            f"min eigenvalue {eig[0]:.3e} (tolerance {tol:.1e})",
            min_eigenvalue=float(eig[0]),
        )
    params = GroundTruthParams(
        sigma2={"A": spec.sigma2_a, "B": spec.sigma2_b},
        gamma2={"A": spec.gamma2_a, "B": spec.gamma2_b},
        intra={"A": eta_a, "B": eta_b},
        rho={("A", "B"): spec.rho},
    )
    return cov, params


@functools.lru_cache(maxsize=16)
def latent_factor(spec: ScenarioSpec) -> np.ndarray:
    """Lower Cholesky factor of the latent covariance.

    Diagonal jitter is escalated from 1e-12 up to the PSD tolerance when the
    plain factorisation fails on a numerically singular matrix.
    """
    cov, _ = build_covariance(spec)
    scale = float(np.max(np.diag(cov))) or 1.0
    limit = max(1e-10, spec.psd_rel_tol * float(np.linalg.eigvalsh(cov)[-1]))
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * scale if jitter == 0.0 else jitter * 10.0
            if jitter > 10.0 * limit:
                eig = float(np.linalg.eigvalsh(cov)[0])
                raise NotPSD(f"Cholesky failed for scenario [{spec.label}]", eig) from None


def replicate_rng(seed: int, replicate_index: int, stream: int = 0) -> np.random.Generator:
    """Independent Philox stream for (seed, replicate, stream)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate_index), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def sample_scenario(spec: ScenarioSpec, replicate_index: int = 0) -> tuple[TimeSeriesMatrix, TimeSeriesMatrix]:
    """Draw one replicate: ``n`` i.i.d. latent samples plus white noise."""
    chol = latent_factor(spec)
    rng = replicate_rng(spec.seed, replicate_index)
    z = rng.standard_normal((spec.n_times, spec.n_a + spec.n_b))
    latent = (z @ chol.T).T
    noise_sd = np.concatenate([np.full(spec.n_a, np.sqrt(spec.gamma2_a)),
                               np.full(spec.n_b, np.sqrt(spec.gamma2_b))])
    observed = latent + noise_sd[:, None] * rng.standard_normal((spec.n_a + spec.n_b, spec.n_times))
    a = TimeSeriesMatrix("A", tuple(f"A{i}" for i in range(spec.n_a)), observed[: spec.n_a])
    b = TimeSeriesMatrix("B", tuple(f"B{j}" for j in range(spec.n_b)), observed[spec.n_a:])
    return a, b
