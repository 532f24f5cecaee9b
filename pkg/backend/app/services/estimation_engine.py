import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize

from .corr_service import CorrelationMatrix, population_correlation, sample_correlation
from .structure_service import FactorStructure
from ..utils.errors import (
    DegenerateBaseline,
    DimensionError,
    DimensionMismatch,
    NonConvergence,
    NotPositiveDefinite,
    StructureError,
)

logger = logging.getLogger("Estimation")

LOG_2PI = math.log(2.0 * math.pi)
# Accept an optimizer exit that is not formally "success" when the gradient is this flat.
GRADIENT_ACCEPT = 1e-4

# ==========================================
# 1. PARAMETERS & CONFIG
# ==========================================


class OptimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iter: int = Field(2000, ge=1)
    ftol: float = Field(1e-8, gt=0)
    gtol: float = Field(1e-6, gt=0)
    omega_floor: float = Field(1e-4, gt=0, lt=1)
    start_loading: float = 0.5
    start_omega: float = Field(0.5, gt=0)
    max_cor: int = Field(20, ge=3)
    strict: bool = False


@dataclass(frozen=True, eq=False)
class FactorParams:
    """theta = {Lambda, Phi, Omega}; `omega` holds the diagonal of Omega."""
    loadings: np.ndarray
    phi: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float).ravel()
        lam = np.array(self.loadings, dtype=float)
        if lam.size == 0:
            lam = np.zeros((omega.shape[0], 0))
        lam = np.atleast_2d(lam)
        phi = np.array(self.phi, dtype=float).reshape(lam.shape[1], lam.shape[1])
        if omega.shape[0] != lam.shape[0]:
            raise DimensionError("Omega must have one entry per observed variable.")
        if np.any(omega <= 0):
            raise NotPositiveDefinite("Error variances must be strictly positive.")
        if phi.size:
            if not np.allclose(phi, phi.T, atol=1e-12) or not np.allclose(np.diag(phi), 1.0, atol=1e-12):
                raise DimensionError("Phi must be a symmetric matrix with unit diagonal.")
            _cholesky(phi, "Phi")
        for name, value in (("loadings", lam), ("phi", phi), ("omega", omega)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def d(self) -> int:
        return self.loadings.shape[1]

    def to_dict(self) -> dict:
        return {"loadings": self.loadings.tolist(), "phi": self.phi.tolist(), "omega": self.omega.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "FactorParams":
        omega = np.asarray(payload["omega"], dtype=float)
        return cls(np.asarray(payload["loadings"], dtype=float), np.asarray(payload["phi"], dtype=float), omega)


@dataclass(frozen=True, eq=False)
class FitResult:
    theta_hat: FactorParams
    structure: FactorStructure
    n: int
    loglik: float
    f_ml: float
    n_params: int
    df: int
    bic: float
    aic: float
    converged: bool
    iterations: int
    heywood: bool = False
    tli: Optional[float] = None
    rmsea: Optional[float] = None
    trace: Tuple[float, ...] = field(default=(), repr=False)
    message: str = ""

    def to_dict(self, include_theta: bool = True) -> dict:
        out = {
            "n": self.n,
            "loglik": self.loglik,
            "f_ml": self.f_ml,
            "n_params": self.n_params,
            "df": self.df,
            "bic": self.bic,
            "aic": self.aic,
            "tli": self.tli,
            "rmsea": self.rmsea,
            "converged": self.converged,
            "iterations": self.iterations,
            "heywood": self.heywood,
            "message": self.message,
            "structure": self.structure.to_dict(),
        }
        if include_theta:
            out["theta_hat"] = self.theta_hat.to_dict()
        return out


def _cholesky(matrix: np.ndarray, label: str):
    try:
        return cho_factor(matrix, lower=True, check_finite=True)
    except (LinAlgError, ValueError):
        raise NotPositiveDefinite(f"{label} failed a Cholesky factorisation.")


# ==========================================
# 2. MODEL-IMPLIED MATRICES
# ==========================================

def model_covariance(theta: FactorParams) -> np.ndarray:
    """Sigma(theta) = Lambda Phi Lambda^T + Omega."""
    lam = theta.loadings
    sigma = lam @ theta.phi @ lam.T
    sigma[np.diag_indices_from(sigma)] += theta.omega
    return (sigma + sigma.T) / 2.0


def implied_sigma(theta: FactorParams) -> CorrelationMatrix:
    """Sigma~(theta) = D^-1 Sigma D^-1, checked positive definite."""
    sigma = model_covariance(theta)
    _cholesky(sigma, "Sigma(theta)")
    return population_correlation(sigma)


def standardize(theta: FactorParams) -> FactorParams:
    """Scaled parameters: Lambda~ = D^-1 Lambda, Omega~ = D^-2 Omega."""
    sd = np.sqrt(np.diag(model_covariance(theta)))
    return FactorParams(theta.loadings / sd[:, None], theta.phi, theta.omega / sd ** 2)


def ml_discrepancy(S: np.ndarray, sigma: np.ndarray) -> float:
    """F_ML = log|Sigma| + tr(S Sigma^-1) - log|S| - p."""
    cf = _cholesky(sigma, "Sigma")
    logdet_sigma = 2.0 * np.sum(np.log(np.diag(cf[0])))
    _, logdet_s = np.linalg.slogdet(S)
    return float(logdet_sigma + np.trace(cho_solve(cf, S)) - logdet_s - S.shape[0])


def gaussian_loglik(S: np.ndarray, sigma: np.ndarray, n: int) -> float:
    cf = _cholesky(sigma, "Sigma")
    logdet_sigma = 2.0 * np.sum(np.log(np.diag(cf[0])))
    return float(-0.5 * n * (logdet_sigma + np.trace(cho_solve(cf, S)) + S.shape[0] * LOG_2PI))


# ==========================================
# 3. UNCONSTRAINED PARAMETERISATION
# ==========================================

class ParameterLayout:
    """
    Maps the free parameters of a structure onto an unconstrained vector
    x = [free loadings | s | c]:
      omega_i = floor + exp(s_i)
      Phi = U U^T, U = C with rows scaled to unit norm, C unit lower-triangular with free c below the diagonal.
    """

    def __init__(self, structure: FactorStructure, omega_floor: float):
        self.p = structure.p
        self.d = structure.d
        self.floor = omega_floor
        self.rows, self.cols = np.nonzero(structure.loading_mask())
        self.k = len(self.rows)
        self.tril = np.tril_indices(self.d, k=-1)
        self.m = len(self.tril[0])

    @property
    def size(self) -> int:
        return self.k + self.p + self.m

    def unpack(self, x):
        lam = np.zeros((self.p, self.d))
        lam[self.rows, self.cols] = x[: self.k]
        es = np.exp(np.clip(x[self.k : self.k + self.p], -700.0, 700.0))
        omega = self.floor + es
        c = np.eye(self.d)
        c[self.tril] = x[self.k + self.p :]
        norms = np.sqrt(np.sum(c * c, axis=1))
        u = c / norms[:, None] if self.d else c
        phi = u @ u.T
        phi = (phi + phi.T) / 2.0
        if self.d:
            phi[np.diag_indices_from(phi)] = 1.0
        return lam, phi, omega, es, u, norms

    def start(self, cfg: OptimConfig) -> np.ndarray:
        s0 = math.log(max(cfg.start_omega - self.floor, 1e-12))
        return np.concatenate([np.full(self.k, cfg.start_loading), np.full(self.p, s0), np.zeros(self.m)])

    def objective(self, x, S: np.ndarray, logdet_s: float):
        """F_ML and its gradient with respect to x."""
        lam, phi, omega, es, u, norms = self.unpack(x)
        sigma = lam @ phi @ lam.T
        sigma[np.diag_indices_from(sigma)] += omega
        try:
            cf = cho_factor(sigma, lower=True)
        except LinAlgError:
            return 1e10, np.zeros_like(x)
        w = cho_solve(cf, np.eye(self.p))
        ws = w @ S
        f = 2.0 * np.sum(np.log(np.diag(cf[0]))) + np.trace(ws) - logdet_s - self.p
        g = w - ws @ w
        g = (g + g.T) / 2.0

        grad = np.empty_like(x)
        grad[: self.k] = (2.0 * g @ lam @ phi)[self.rows, self.cols]
        grad[self.k : self.k + self.p] = np.diag(g) * es
        if self.m:
            h = lam.T @ g @ lam
            gu = 2.0 * h @ u
            proj = gu - np.sum(gu * u, axis=1)[:, None] * u
            grad[self.k + self.p :] = (proj / norms[:, None])[self.tril]
        return float(f), grad


# ==========================================
# 4. MAXIMUM LIKELIHOOD FIT
# ==========================================

def _sign_normalize(lam: np.ndarray, phi: np.ndarray):
    """Largest-magnitude loading of every factor made positive."""
    lam, phi = lam.copy(), phi.copy()
    for j in range(lam.shape[1]):
        if lam[np.argmax(np.abs(lam[:, j])), j] < 0:
            lam[:, j] *= -1.0
            phi[j, :] *= -1.0
            phi[:, j] *= -1.0
    return lam, phi


def count_parameters(structure: FactorStructure) -> int:
    d = structure.d
    return len(structure.support) + d * (d - 1) // 2 + structure.p


def fit_mle(S_target: CorrelationMatrix, structure: FactorStructure, n: int, cfg: OptimConfig = None) -> FitResult:
    """Constrained Gaussian ML fit of a fixed structure to a correlation matrix."""
    cfg = cfg or OptimConfig()
    S = np.asarray(S_target.entries, dtype=float)
    p = S.shape[0]
    if structure.p != p:
        raise DimensionMismatch(f"Structure has p = {structure.p}, matrix has p = {p}.")
    if not structure.is_estimable:
        raise StructureError(f"Structure with d = {structure.d} >= p = {p} is not identified.")
    if n < 2:
        raise DimensionError("Sample size must be at least 2.")
    _cholesky(S, "Target correlation matrix")
    _, logdet_s = np.linalg.slogdet(S)

    layout = ParameterLayout(structure, cfg.omega_floor)
    trace = []

    def record(xk):
        trace.append(layout.objective(xk, S, logdet_s)[0])

    x0 = layout.start(cfg)
    trace.append(layout.objective(x0, S, logdet_s)[0])
    res = minimize(
        layout.objective,
        x0,
        args=(S, logdet_s),
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={
            "maxiter": cfg.max_iter,
            "maxfun": cfg.max_iter * 20,
            "ftol": cfg.ftol,
            "gtol": cfg.gtol,
            "maxcor": cfg.max_cor,
        },
    )
    grad_norm = float(np.max(np.abs(res.jac), initial=0.0))
    converged = bool(res.success) or grad_norm <= GRADIENT_ACCEPT
    if not converged:
        logger.warning(f"⚠️ Fit did not converge (d = {structure.d}, |A| = {len(structure.support)}): {res.message}")
        if cfg.strict:
            raise NonConvergence(str(res.message))

    lam, phi, omega, _, _, _ = layout.unpack(res.x)
    heywood = bool(np.any(omega <= 10.0 * cfg.omega_floor))
    if heywood:
        logger.warning(f"⚠️ Heywood boundary: error variances at the floor for variables {np.flatnonzero(omega <= 10.0 * cfg.omega_floor).tolist()}")
    lam, phi = _sign_normalize(lam, phi)
    theta_hat = standardize(FactorParams(lam, phi, omega))

    sigma_tilde = implied_sigma(theta_hat).entries
    f_ml = ml_discrepancy(S, sigma_tilde)
    loglik = gaussian_loglik(S, sigma_tilde, n)
    n_params = count_parameters(structure)
    df = p * (p + 1) // 2 - n_params
    fit = FitResult(
        theta_hat=theta_hat,
        structure=structure,
        n=n,
        loglik=loglik,
        f_ml=f_ml,
        n_params=n_params,
        df=df,
        bic=-2.0 * loglik + n_params * math.log(n),
        aic=-2.0 * loglik + 2.0 * n_params,
        converged=converged,
        iterations=int(res.nit),
        heywood=heywood,
        trace=tuple(float(v) for v in trace),
        message=str(res.message),
    )
    try:
        tli, rmsea = fit_indices(fit, S_target)
        fit = replace(fit, tli=tli, rmsea=rmsea)
    except DegenerateBaseline as e:
        logger.debug(f"Fit indices unavailable: {e.message}")
    return fit


# ==========================================
# 5. SELECTION CRITERIA & FIT INDICES
# ==========================================

def bic(fit: FitResult) -> float:
    return -2.0 * fit.loglik + fit.n_params * math.log(fit.n)


def rmsea_from_chi2(chi2: float, df: int, n: int) -> float:
    return math.sqrt(max(chi2 - df, 0.0) / (df * (n - 1)))


def tli_from_chi2(chi2: float, df: int, chi2_base: float, df_base: int) -> float:
    base_ratio = chi2_base / df_base
    if base_ratio == 1.0:
        raise DegenerateBaseline("Baseline chi-square ratio equals 1.")
    return (base_ratio - chi2 / df) / (base_ratio - 1.0)


def fit_indices(fit: FitResult, S_target: CorrelationMatrix) -> Tuple[float, float]:
    """
    (TLI, RMSEA) with chi2 = (n - 1) F_ML against the independence baseline
    (diagonal model, df_b = p(p - 1) / 2).
    """
    S = np.asarray(S_target.entries, dtype=float)
    p = S.shape[0]
    df_base = p * (p - 1) // 2
    if df_base == 0 or fit.df <= 0:
        raise DegenerateBaseline(f"Fit indices need df > 0 and df_b > 0 (df = {fit.df}, df_b = {df_base}).")
    chi2 = (fit.n - 1) * max(fit.f_ml, 0.0)
    chi2_base = (fit.n - 1) * ml_discrepancy(S, np.eye(p))
    return tli_from_chi2(chi2, fit.df, chi2_base, df_base), rmsea_from_chi2(chi2, fit.df, fit.n)


def test_loglik(fit: FitResult, heldout) -> float:
    """Gaussian log-likelihood of standardised held-out data under Sigma~(theta-hat)."""
    x = np.asarray(heldout, dtype=float)
    if x.ndim != 2 or x.shape[1] != fit.structure.p:
        raise DimensionMismatch(f"Held-out data must have {fit.structure.p} columns.")
    S_new = sample_correlation(x).entries
    return gaussian_loglik(S_new, implied_sigma(fit.theta_hat).entries, x.shape[0])


# keep pytest from collecting the function above as a test
test_loglik.__test__ = False
