import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import LinAlgError, cholesky

from .estimation_engine import FactorParams, implied_sigma, model_covariance
from .structure_service import FactorStructure
from ..utils.errors import InfeasibleScheme, InputError, NegativeErrorVariance, NotPositiveDefinite

logger = logging.getLogger("SimGen")

# communality must stay this far below 1 for a row to keep a unit total variance
_COMMUNALITY_MARGIN = 1e-3

# ==========================================
# 1. CONFIGURATION
# ==========================================


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    d: int = Field(3, ge=1)
    children_per_factor: int = Field(5, ge=1)
    n: int = Field(1000, ge=2)
    alpha: float = Field(0.0, ge=0.0, le=1.0)
    beta: float = Field(0.0, ge=0.0, le=1.0)
    loading_range: Tuple[float, float] = (0.6, 0.8)
    phi_range: Tuple[float, float] = (0.6, 0.8)
    scheme: Literal["alpha_study", "beta_study"] = "alpha_study"
    seed: int = Field(0, ge=0, lt=2 ** 64)
    row_retries: int = Field(50, ge=0)
    phi_retries: int = Field(100, ge=1)
    strict_total_variance: bool = False

    @model_validator(mode="after")
    def _check_ranges(self):
        for name in ("loading_range", "phi_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must satisfy lo <= hi, got ({lo}, {hi}).")
        return self

    @property
    def p(self) -> int:
        return self.d * self.children_per_factor


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed for replicate `index`."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)[0])


def _streams(seed: int):
    """Separate generators for structure, parameters, data and held-out data."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(4)]


# ==========================================
# 2. STRUCTURE GENERATION
# ==========================================

def _other_factor(rng: np.random.Generator, home: int, d: int) -> int:
    t = int(rng.integers(d - 1))
    return t if t < home else t + 1


def gen_structure(cfg: SimConfig, rng: np.random.Generator = None) -> FactorStructure:
    """
    Independent clusters of `children_per_factor` indicators, then cross-loadings:
      alpha_study: one protected child per factor; floor(p / 2) unprotected variables get one extra parent.
      beta_study:  round(beta * d) factors are picked; every child of each gets one extra parent.
    """
    rng = rng or _streams(cfg.seed)[0]
    d, c, p = cfg.d, cfg.children_per_factor, cfg.p
    support = {(i, i // c) for i in range(p)}

    if cfg.scheme == "alpha_study":
        if d == 1:
            raise InfeasibleScheme("Cross-loadings need at least two factors.")
        protected = {j * c + int(rng.integers(c)) for j in range(d)}
        unprotected = np.array([i for i in range(p) if i not in protected])
        n_cross = p // 2
        if n_cross > len(unprotected):
            raise InfeasibleScheme(f"Cannot cross-load {n_cross} of {len(unprotected)} unprotected variables.")
        for i in sorted(rng.choice(unprotected, size=n_cross, replace=False).tolist()):
            support.add((i, _other_factor(rng, i // c, d)))
    else:
        k = int(np.floor(cfg.beta * d + 0.5))
        if k > 0 and d == 1:
            raise InfeasibleScheme("Cross-loadings need at least two factors.")
        for j in sorted(rng.choice(d, size=k, replace=False).tolist()):
            for i in range(j * c, (j + 1) * c):
                support.add((i, _other_factor(rng, j, d)))

    return FactorStructure(p, d, frozenset(support))


# ==========================================
# 3. PARAMETER GENERATION
# ==========================================

def _gen_phi(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    d = cfg.d
    if cfg.scheme == "beta_study" or d == 1:
        return np.eye(d)
    lo, hi = cfg.phi_range
    iu = np.triu_indices(d, k=1)
    for attempt in range(cfg.phi_retries):
        a = rng.uniform(size=(d, d))
        off = (a.T @ a)[iu]
        span = off.max() - off.min()
        scaled = np.full_like(off, (lo + hi) / 2.0) if span <= 1e-12 else lo + (off - off.min()) / span * (hi - lo)
        phi = np.eye(d)
        phi[iu] = cfg.alpha * scaled
        phi.T[iu] = cfg.alpha * scaled
        try:
            cholesky(phi, lower=True)
            return phi
        except LinAlgError:
            logger.debug(f"Phi draw {attempt} not positive definite, regenerating.")
    raise NotPositiveDefinite(f"No positive definite Phi after {cfg.phi_retries} draws.")


def gen_params(structure: FactorStructure, cfg: SimConfig, rng: np.random.Generator = None) -> FactorParams:
    """
    Loadings ~ U[loading_range] on the support, Phi from a rescaled A^T A times alpha
    (identity for beta_study), error variances giving every variable unit total variance.
    """
    rng = rng or _streams(cfg.seed)[1]
    lo, hi = cfg.loading_range
    mask = structure.loading_mask()
    phi = _gen_phi(cfg, rng)
    lam = np.where(mask, rng.uniform(lo, hi, size=mask.shape), 0.0)
    omega = np.empty(structure.p)

    for i in range(structure.p):
        h = lam[i] @ phi @ lam[i]
        retries = 0
        while h >= 1.0 - _COMMUNALITY_MARGIN and retries < cfg.row_retries:
            lam[i] = np.where(mask[i], rng.uniform(lo, hi, size=structure.d), 0.0)
            h = lam[i] @ phi @ lam[i]
            retries += 1
        if h < 1.0 - _COMMUNALITY_MARGIN:
            omega[i] = 1.0 - h
            continue
        if cfg.strict_total_variance:
            raise NegativeErrorVariance(f"Variable {i} has communality {h:.3f} >= 1 after {retries} redraws.")
        # unit raw error variance, then standardised
        logger.debug(f"Variable {i}: communality {h:.3f}, standardising with unit error variance.")
        lam[i] = lam[i] / np.sqrt(h + 1.0)
        omega[i] = 1.0 / (h + 1.0)

    theta = FactorParams(lam, phi, omega)
    implied_sigma(theta)
    return theta


# ==========================================
# 4. DATA GENERATION
# ==========================================

def sample_data(theta: FactorParams, n: int, seed) -> np.ndarray:
    """n draws from N_p(0, Sigma(theta)) through a Cholesky factor; `seed` is an integer or a Generator."""
    if seed is None:
        raise InputError("sample_data needs an explicit seed or Generator.")
    sigma = model_covariance(theta)
    try:
        chol = cholesky(sigma, lower=True)
    except LinAlgError:
        raise NotPositiveDefinite("Sigma(theta) failed a Cholesky factorisation.")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.standard_normal((n, theta.p)) @ chol.T


@dataclass(frozen=True, eq=False)
class SimBundle:
    config: SimConfig
    structure: FactorStructure
    theta: FactorParams
    data: Optional[np.ndarray] = None
    heldout: Optional[np.ndarray] = None


def simulate(cfg: SimConfig, with_data: bool = True, with_heldout: bool = True) -> SimBundle:
    """Structure, parameters and (optionally) a training and a held-out sample, all from cfg.seed."""
    s_rng, p_rng, d_rng, h_rng = _streams(cfg.seed)
    structure = gen_structure(cfg, s_rng)
    theta = gen_params(structure, cfg, p_rng)
    data = sample_data(theta, cfg.n, d_rng) if with_data else None
    heldout = sample_data(theta, cfg.n, h_rng) if with_data and with_heldout else None
    return SimBundle(cfg, structure, theta, data, heldout)
