import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from .clique_service import independent_maximal_cliques
from .corr_service import CorrelationMatrix, ThresholdGrid, candidate_thresholds, parse_grid, threshold_edges
from .estimation_engine import FitResult, OptimConfig, fit_mle
from .metrics_service import structural_score
from .structure_service import (
    FactorStructure,
    SingletonPolicy,
    canonical_key,
    canonicalize,
    cliques_to_structure,
)
from ..utils.errors import CTError, DimensionError, NoCandidates, NonConvergence, NotPositiveDefinite

logger = logging.getLogger("CTEngine")

BIC_TIE = 1e-9

# ==========================================
# 1. CONFIG & RESULT TYPES
# ==========================================


class CtConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid: str = "unique"
    singletons: SingletonPolicy = SingletonPolicy.DROP
    fit_null: bool = True
    optim: Optional[OptimConfig] = None


@dataclass
class CandidateRecord:
    """One distinct structure proposed by the threshold sweep."""
    tau: float
    structure: FactorStructure
    taus: Tuple[float, ...] = ()
    fit: Optional[FitResult] = None
    error: Optional[str] = None

    @property
    def d_hat(self) -> int:
        return self.structure.d

    def to_dict(self, include_theta: bool = False) -> dict:
        out = {
            "tau": self.tau,
            "taus": list(self.taus),
            "d": self.d_hat,
            "structure": self.structure.to_dict(),
            "bic": None,
            "tli": None,
            "rmsea": None,
            "converged": None,
            "error": self.error,
        }
        if self.fit is not None:
            out.update(
                bic=self.fit.bic,
                tli=self.fit.tli,
                rmsea=self.fit.rmsea,
                converged=self.fit.converged,
                fit=self.fit.to_dict(include_theta=include_theta),
            )
        return out


@dataclass
class CtResult:
    candidates: List[CandidateRecord]
    selected_index: Optional[int]
    models_tested: int
    grid: ThresholdGrid
    warnings: List[str] = field(default_factory=list)

    @property
    def selected(self) -> Optional[CandidateRecord]:
        return None if self.selected_index is None else self.candidates[self.selected_index]

    def to_dict(self) -> dict:
        sel = self.selected
        return {
            "grid": {"mode": self.grid.mode, "size": len(self.grid)},
            "models_tested": self.models_tested,
            "selected_index": self.selected_index,
            "selected": None if sel is None else sel.to_dict(include_theta=True),
            "candidates": [c.to_dict() for c in self.candidates],
            "warnings": list(self.warnings),
        }


# ==========================================
# 2. THRESHOLD SWEEP
# ==========================================

def resolve_grid(R: CorrelationMatrix, grid, cfg: CtConfig) -> ThresholdGrid:
    if isinstance(grid, ThresholdGrid):
        return grid
    mode, m = parse_grid(grid or cfg.grid)
    return candidate_thresholds(R, mode, m)


def propose_structures(R: CorrelationMatrix, grid: ThresholdGrid, policy=SingletonPolicy.DROP) -> List[CandidateRecord]:
    """
    Threshold -> independent maximal cliques -> structure for every tau, ascending.
    Structures are deduplicated by canonical form; each record keeps its first tau
    and lists every tau that produced it.
    """
    found = {}
    for tau in sorted(grid.values):
        cliques = independent_maximal_cliques(threshold_edges(R, tau))
        S = canonicalize(cliques_to_structure(cliques, policy))
        key = canonical_key(S)
        if key in found:
            found[key].taus += (tau,)
        else:
            found[key] = CandidateRecord(tau=tau, structure=S, taus=(tau,))
    return list(found.values())


# ==========================================
# 3. ESTIMATION & SELECTION
# ==========================================

def _select(records: List[CandidateRecord], warnings: List[str]) -> Optional[int]:
    fitted = [i for i, r in enumerate(records) if r.fit is not None]
    if not fitted:
        return None
    eligible = [i for i in fitted if records[i].fit.converged]
    if not eligible:
        best = min(fitted, key=lambda i: records[i].fit.f_ml)
        msg = f"No candidate converged; falling back to the smallest F_ML (candidate {best})."
        logger.warning(f"⚠️ {msg}")
        warnings.append(msg)
        return best

    best_bic = min(records[i].fit.bic for i in eligible)
    tied = [i for i in eligible if records[i].fit.bic <= best_bic + BIC_TIE]
    return min(tied, key=lambda i: (records[i].fit.n_params, -max(records[i].taus)))


def _fit_record(rec: CandidateRecord, R: CorrelationMatrix, n: int, optim: OptimConfig, cfg: CtConfig, failures: List[CTError]):
    S = rec.structure
    if S.d == 0 and not cfg.fit_null:
        rec.error = "null model fitting disabled"
        return
    if not S.is_estimable:
        rec.error = f"d = {S.d} >= p = {S.p}; not estimated"
        logger.warning(f"⚠️ Skipping unidentified structure at tau = {rec.tau:.4f}: {rec.error}")
        return
    try:
        rec.fit = fit_mle(R, S, n, optim)
    except (NotPositiveDefinite, NonConvergence) as e:
        rec.error = e.message
        failures.append(e)
        logger.warning(f"⚠️ Fit failed at tau = {rec.tau:.4f} (d = {S.d}): {e.message}")


def ct_fit(R: CorrelationMatrix, n: int, grid=None, cfg: CtConfig = None) -> CtResult:
    """Full CT pipeline: sweep, deduplicate, fit each distinct structure once, pick the minimum BIC."""
    cfg = cfg or CtConfig()
    if n < 2:
        raise DimensionError(f"Sample size must be at least 2, got n = {n}.")
    if cfg.optim is None:
        from ..config import default_optim_config
        optim = default_optim_config()
    else:
        optim = cfg.optim

    grid = resolve_grid(R, grid, cfg)
    records = propose_structures(R, grid, cfg.singletons)
    warnings: List[str] = []
    failures: List[CTError] = []

    for rec in records:
        _fit_record(rec, R, n, optim, cfg, failures)

    if cfg.fit_null and not any(r.structure.is_estimable for r in records):
        # only reachable with kept singletons
        top = max(grid.values)
        null = CandidateRecord(tau=top, structure=FactorStructure(R.p, 0), taus=(top,))
        logger.info("No estimable structure proposed; adding the d = 0 noise model.")
        _fit_record(null, R, n, optim, cfg, failures)
        records.append(null)

    selected = _select(records, warnings)
    if selected is None:
        if failures:
            raise failures[0]
        raise NoCandidates("No estimable structure was proposed and null fitting is disabled.")

    logger.info(
        f"✅ CT fit: {len(grid)} thresholds, {len(records)} structures, "
        f"selected d = {records[selected].d_hat} at tau = {records[selected].tau:.4f}"
    )
    return CtResult(records, selected, len(records), grid, warnings)


# ==========================================
# 4. STRUCTURE-ONLY SCAN
# ==========================================

def ct_scan(R: CorrelationMatrix, grid=None, cfg: CtConfig = None) -> List[CandidateRecord]:
    """The sweep without estimation or selection; usable when p exceeds n."""
    cfg = cfg or CtConfig(grid="equi:50")
    return propose_structures(R, resolve_grid(R, grid, cfg), cfg.singletons)


def best_candidate_vs_truth(records: List[CandidateRecord], truth: FactorStructure) -> Tuple[int, int, float]:
    """(index, hd, f1) of the record closest to `truth`; the earliest record wins ties."""
    if not records:
        raise NoCandidates("No candidate structures to compare.")
    scores = [structural_score(r.structure, truth) for r in records]
    best = min(range(len(records)), key=lambda i: (scores[i].hd, -scores[i].f1, i))
    return best, scores[best].hd, scores[best].f1


def scan_report(records: List[CandidateRecord], grid: ThresholdGrid, truth: FactorStructure = None) -> dict:
    rows = [r.to_dict() for r in records]
    out = {"grid": {"mode": grid.mode, "size": len(grid)}, "models": len(records), "records": rows}
    if truth is not None:
        for row, rec in zip(rows, records):
            score = structural_score(rec.structure, truth)
            row["hd"], row["f1"] = score.hd, score.f1
        best, hd, f1 = best_candidate_vs_truth(records, truth)
        out["best"] = {"index": best, "hd": hd, "f1": f1}
    return out
