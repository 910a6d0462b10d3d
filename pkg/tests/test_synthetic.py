import numpy as np
import pytest

from clacorr.core_stats import pairwise_correlations
from clacorr.errors import ConfigError, GeometryError, NotPSD
from clacorr.synthetic import (
    ScenarioSpec,
    VoxelGeometry,
    build_covariance,
    default_geometry,
    intra_correlation,
    lattice_block,
    matern_correlation,
    replicate_rng,
    sample_scenario,
    spherical_correlation,
    toeplitz_correlation,
)
from clacorr.ward import h_max


def test_toeplitz_kernel_values():
    eta = toeplitz_correlation(VoxelGeometry(np.arange(60.0)[:, None]), 0.2)
    assert np.all(np.diag(eta) == 1.0)
    assert eta[0, 30] == 0.2
    assert eta[0, 3] == pytest.approx(0.9)
    assert eta[10, 59] == 0.2


@pytest.mark.parametrize("phi", [0.6, 2.0])
def test_matern_closed_forms(phi):
    d = np.linspace(0.0, 5.0, 41)
    x = d / phi
    assert np.allclose(matern_correlation(d, phi, 0.5), np.exp(-x), atol=1e-13)
    assert np.allclose(matern_correlation(d, phi, 1.5), (1 + x) * np.exp(-x), atol=1e-13)


def test_matern_large_smoothness_is_stable():
    d = np.linspace(0.0, 20.0, 401)
    m = matern_correlation(d, 0.6, 70.0)
    assert m[0] == 1.0
    assert np.all(np.isfinite(m))
    assert np.all(np.diff(m) <= 1e-15)
    assert np.all((m >= 0) & (m <= 1))


def test_spherical_kernel():
    d = np.linspace(0.0, 20.0, 201)
    s = spherical_correlation(d, 8.0)
    assert s[0] == 1.0
    assert np.all(s[d >= 8.0] == 0.0)
    assert np.all(np.diff(s) <= 0)
    assert spherical_correlation(4.0, 8.0) == pytest.approx(1 - 0.75 + 0.0625)


def test_lattice_block():
    assert lattice_block(60) == (5, 4, 3)
    assert lattice_block(8) == (2, 2, 2)
    with pytest.raises(GeometryError):
        lattice_block(61)


def test_default_geometry():
    g = default_geometry("toeplitz1d", 60)
    assert g.coordinates[:, 0].tolist() == list(range(60))
    a = default_geometry("matern3d", 60, 0).coordinates
    b = default_geometry("matern3d", 60, 1).coordinates
    assert len({tuple(p) for p in a}) == 60
    assert not {tuple(p) for p in a} & {tuple(p) for p in b}
    coords = [(0, 0, 0), (1, 2, 3), (4, 4, 4)]
    assert default_geometry("spherical3d", 3, 1, coords).coordinates.tolist() == [list(map(float, c)) for c in coords]
    with pytest.raises(GeometryError):
        default_geometry("spherical3d", 4, 0, coords)
    with pytest.raises(GeometryError):
        VoxelGeometry(np.zeros((2, 3)))


def test_spec_validation():
    with pytest.raises(ConfigError):
        ScenarioSpec(model="gaussian")
    with pytest.raises(ConfigError):
        ScenarioSpec(n_times=2)
    with pytest.raises(ConfigError):
        ScenarioSpec(gamma2_a=-0.1)
    with pytest.raises(ConfigError):
        ScenarioSpec(rho=1.5)
    with pytest.raises(ConfigError):
        ScenarioSpec(model="matern3d", phi_a=0.0)


@pytest.mark.parametrize("spec", [
    ScenarioSpec(),
    ScenarioSpec(eta_minus_a=0.8, eta_minus_b=0.2),
    ScenarioSpec(model="matern3d", phi_a=0.6, phi_b=0.8),
    ScenarioSpec(model="spherical3d", phi_a=8.0, phi_b=12.0),
])
def test_covariance_structure(spec):
    cov, params = build_covariance(spec)
    assert np.array_equal(cov, cov.T)
    assert np.all(np.diag(cov)[:60] == spec.sigma2_a)
    assert np.all(cov[:60, 60:] == spec.rho * np.sqrt(spec.sigma2_a * spec.sigma2_b))
    assert np.array_equal(params.intra["A"], intra_correlation(spec, "A"))
    assert params.rho_of(("B", "A")) == spec.rho


def test_infeasible_regime_raises():
    # eigenvalue scan: eta-=0.0 with rho=0.5 leaves a min eigenvalue near -6.4
    with pytest.raises(NotPSD) as exc:
        build_covariance(ScenarioSpec(eta_minus_a=0.0, eta_minus_b=0.0, rho=0.5))
    assert exc.value.min_eigenvalue < -6.0
    build_covariance(ScenarioSpec(eta_minus_a=0.0, eta_minus_b=0.0, rho=0.1))


def test_matern_needs_relative_tolerance():
    spec = ScenarioSpec(model="matern3d", phi_a=0.6, phi_b=0.6)
    build_covariance(spec)
    with pytest.raises(NotPSD):
        build_covariance(spec.with_(psd_rel_tol=0.0))


def test_sampling_is_deterministic():
    spec = ScenarioSpec(n_a=5, n_b=4, n_times=50, seed=17)
    a1, b1 = sample_scenario(spec, 3)
    a2, b2 = sample_scenario(spec, 3)
    assert np.array_equal(a1.values, a2.values) and np.array_equal(b1.values, b2.values)
    assert not np.array_equal(a1.values, sample_scenario(spec, 4)[0].values)
    assert a1.voxel_ids == ("A0", "A1", "A2", "A3", "A4") and b1.region_id == "B"


def test_replicate_streams_independent_of_order():
    x = replicate_rng(5, 2, 1).standard_normal(3)
    replicate_rng(5, 0, 0).standard_normal(100)
    assert np.array_equal(x, replicate_rng(5, 2, 1).standard_normal(3))
    assert not np.array_equal(x, replicate_rng(5, 2, 0).standard_normal(3))


def test_empirical_covariance_matches_target():
    spec = ScenarioSpec(n_a=10, n_b=10, n_times=5000, eta_minus_a=0.2, eta_minus_b=0.8, seed=4)
    cov, _ = build_covariance(spec)
    target = cov + np.diag(np.r_[np.full(10, spec.gamma2_a), np.full(10, spec.gamma2_b)])
    a, b = sample_scenario(spec, 0)
    emp = np.cov(np.vstack([a.values, b.values]), bias=True)
    assert np.abs(emp - target).max() <= 0.1


def test_noiseless_copies_correlate_perfectly():
    spec = ScenarioSpec(n_a=3, n_b=3, n_times=400, eta_minus_a=1.0, eta_minus_b=1.0,
                        gamma2_a=0.0, gamma2_b=0.0, rho=1.0)
    a, b = sample_scenario(spec, 0)
    r = pairwise_correlations(a, b).entries
    assert np.all(r > 1 - 1e-6)


def test_toeplitz_band_with_noise_attenuation():
    spec = ScenarioSpec(n_a=60, n_b=60, n_times=4000, seed=2)
    a, _ = sample_scenario(spec, 0)
    r = pairwise_correlations(a, a).entries
    for lag in (1, 10, 20, 40):
        band = np.diagonal(r, lag).mean()
        expected = max(1 - lag / 30, 0.2) / (1 + spec.gamma2_a)
        assert band == pytest.approx(expected, abs=0.02)


def test_sample_h_max_near_population_value():
    spec = ScenarioSpec(n_times=5000, gamma2_a=0.0, gamma2_b=0.0, seed=8)
    a, _ = sample_scenario(spec, 0)
    hm = h_max(pairwise_correlations(a, a))
    assert hm == pytest.approx(np.sqrt(2 * 0.8), abs=0.05)
    assert hm >= np.sqrt(2 * 0.8) - 0.01
