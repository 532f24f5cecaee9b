import numpy as np
import pytest
from pydantic import ValidationError
from scipy.linalg import cholesky

from backend.app.services.corr_service import sample_correlation
from backend.app.services.estimation_engine import FactorParams, implied_sigma, model_covariance
from backend.app.services.metrics_service import thresholdability
from backend.app.services.simulation_service import (
    SimConfig,
    derive_seed,
    gen_params,
    gen_structure,
    sample_data,
    simulate,
)
from backend.app.services.structure_service import unique_child_report
from backend.app.utils.errors import InfeasibleScheme, InputError, NegativeErrorVariance

# ==========================================
# 1. STRUCTURES
# ==========================================


def test_beta_zero_is_independent_cluster():
    S = gen_structure(SimConfig(d=4, scheme="beta_study", beta=0.0, seed=1))
    assert S.is_independent_cluster()
    assert unique_child_report(S).holds


def test_beta_one_two_factors_loads_everything_twice():
    S = gen_structure(SimConfig(d=2, scheme="beta_study", beta=1.0, seed=3))
    assert all(S.parents(i) == {0, 1} for i in range(S.p))
    assert not unique_child_report(S).holds


def test_alpha_study_cross_loading_counts():
    for seed in range(100):
        S = gen_structure(SimConfig(d=4, children_per_factor=5, seed=seed))
        parents = [len(S.parents(i)) for i in range(S.p)]
        assert parents.count(2) == 10 and parents.count(1) == 10
        report = unique_child_report(S)
        assert report.holds
        assert all(len(u) >= 1 for u in report.unique)


def test_single_factor_cannot_cross_load():
    with pytest.raises(InfeasibleScheme):
        gen_structure(SimConfig(d=1))


def test_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(alpha=1.5)
    with pytest.raises(ValidationError):
        SimConfig(loading_range=(0.8, 0.6))


# ==========================================
# 2. PARAMETERS
# ==========================================

def test_alpha_zero_gives_identity_phi():
    cfg = SimConfig(d=3, alpha=0.0, seed=4)
    theta = gen_params(gen_structure(cfg), cfg)
    assert np.array_equal(theta.phi, np.eye(3))


def test_alpha_one_two_factors_phi_in_range():
    cfg = SimConfig(d=2, alpha=1.0, seed=8)
    theta = gen_params(gen_structure(cfg), cfg)
    assert 0.6 <= theta.phi[0, 1] <= 0.8


def test_generated_parameters_are_valid():
    for seed in range(200):
        cfg = SimConfig(d=2 + seed % 3, alpha=(seed % 5) / 4, seed=seed)
        theta = simulate(cfg, with_data=False).theta
        np.testing.assert_allclose(np.diag(model_covariance(theta)), 1.0, atol=1e-12)
        cholesky(implied_sigma(theta).entries, lower=True)
        assert np.all((theta.omega > 0) & (theta.omega < 1))


def test_strict_total_variance_raises():
    cfg = SimConfig(d=3, alpha=1.0, seed=2, row_retries=5, strict_total_variance=True)
    with pytest.raises(NegativeErrorVariance):
        gen_params(gen_structure(cfg), cfg)


def test_beta_study_zero_is_thresholdable():
    for seed in range(10):
        bundle = simulate(SimConfig(d=4, scheme="beta_study", beta=0.0, seed=seed), with_data=False)
        report = thresholdability(implied_sigma(bundle.theta), bundle.structure.edge_set())
        assert report.thresholdable


# ==========================================
# 3. DATA
# ==========================================

def test_sampling_is_deterministic(eq5):
    a = sample_data(eq5["theta"], 50, seed=12)
    b = sample_data(eq5["theta"], 50, seed=12)
    assert np.array_equal(a, b)


def test_noise_model_sample_is_near_identity():
    theta = FactorParams(np.zeros((4, 0)), np.zeros((0, 0)), np.ones(4))
    R = sample_correlation(sample_data(theta, 10000, seed=1)).entries
    off = np.abs(R[~np.eye(4, dtype=bool)])
    assert off.max() <= 4 / np.sqrt(10000)


def test_large_sample_matches_population(eq5):
    R = sample_correlation(sample_data(eq5["theta"], 100000, seed=5)).entries
    assert np.max(np.abs(R - eq5["sigma"].entries)) <= 0.02


def test_simulate_bundle_shapes():
    cfg = SimConfig(d=3, n=120, seed=6)
    bundle = simulate(cfg)
    assert bundle.data.shape == (120, 15)
    assert bundle.heldout.shape == (120, 15)
    assert not np.array_equal(bundle.data, bundle.heldout)
    again = simulate(cfg)
    assert np.array_equal(bundle.data, again.data)
    assert again.structure == bundle.structure


def test_derive_seed():
    assert derive_seed(1, 0) == derive_seed(1, 0)
    assert len({derive_seed(1, i) for i in range(50)}) == 50
    assert derive_seed(1, 0) != derive_seed(2, 0)


def test_sample_data_requires_seed(eq5):
    with pytest.raises(InputError):
        sample_data(eq5["theta"], 10, None)
