import numpy as np
import pytest

from backend.app.services.estimation_engine import FactorParams, OptimConfig, implied_sigma, standardize
from backend.app.services.structure_service import FactorStructure

# Two correlated factors, variable 2 loads on both.
EQ5_CHILDREN = [(0, 1, 2), (2, 3, 4)]
EQ5_BETWEEN = 0.147
EQ5_MIN_WITHIN = 0.637 / np.sqrt(1.784)


def eq5_structure() -> FactorStructure:
    return FactorStructure.from_child_sets(5, EQ5_CHILDREN)


def eq5_theta() -> FactorParams:
    lam = np.where(eq5_structure().loading_mask(), 0.7, 0.0)
    phi = np.array([[1.0, 0.3], [0.3, 1.0]])
    return standardize(FactorParams(lam, phi, np.full(5, 0.51)))


@pytest.fixture
def eq5():
    theta = eq5_theta()
    return {"structure": eq5_structure(), "theta": theta, "sigma": implied_sigma(theta)}


@pytest.fixture
def tight_optim():
    return OptimConfig(max_iter=5000, ftol=1e-14, gtol=1e-10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
