from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corr_service import CorrelationMatrix, EdgeSet
from .structure_service import FactorStructure
from ..utils.errors import DimensionMismatch

# ==========================================
# 1. STRUCTURAL ACCURACY (HD / F1)
# ==========================================


@dataclass(frozen=True)
class StructuralScore:
    hd: int
    f1: float
    permutation: Tuple[int, ...]
    tp: int
    fp: int
    fn: int

    def to_dict(self) -> dict:
        return {"hd": self.hd, "f1": self.f1, "permutation": list(self.permutation),
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


def f1_score(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2.0 * tp / denom


def _padded_mask(S: FactorStructure, width: int) -> np.ndarray:
    mask = np.zeros((S.p, width), dtype=np.int64)
    mask[:, : S.d] = S.loading_mask()
    return mask


def structural_score(est: FactorStructure, truth: FactorStructure) -> StructuralScore:
    """
    Minimum support symmetric difference over column permutations of the estimate,
    after padding the narrower pattern with zero columns.
    The difference is separable per matched column pair, so an optimal assignment
    on cost[a, b] = |ch_est(a) xor ch_truth(b)| attains the minimum.
    """
    if est.p != truth.p:
        raise DimensionMismatch(f"Estimate has p = {est.p}, truth has p = {truth.p}.")
    width = max(est.d, truth.d)
    if width == 0:
        return StructuralScore(0, 1.0, (), 0, 0, 0)

    e = _padded_mask(est, width)
    t = _padded_mask(truth, width)
    overlap = e.T @ t
    cost = e.sum(axis=0)[:, None] + t.sum(axis=0)[None, :] - 2 * overlap
    rows, cols = linear_sum_assignment(cost)

    tp = int(overlap[rows, cols].sum())
    fp = len(est.support) - tp
    fn = len(truth.support) - tp
    assignment = dict(zip(rows.tolist(), cols.tolist()))
    return StructuralScore(
        hd=int(cost[rows, cols].sum()),
        f1=f1_score(tp, fp, fn),
        permutation=tuple(assignment[a] for a in range(est.d)),
        tp=tp,
        fp=fp,
        fn=fn,
    )


# ==========================================
# 2. THRESHOLDABILITY & SORTABILITY
# ==========================================


@dataclass(frozen=True)
class ThresholdabilityReport:
    thresholdable: bool
    max_between: float
    min_within: float
    interval: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        return {
            "thresholdable": self.thresholdable,
            "max_between": self.max_between,
            "min_within": None if np.isinf(self.min_within) else self.min_within,
            "interval": list(self.interval) if self.interval else None,
        }


def _split_magnitudes(Sig: CorrelationMatrix, E0: EdgeSet):
    if E0.p != Sig.p:
        raise DimensionMismatch(f"Edge set has p = {E0.p}, matrix has p = {Sig.p}.")
    iu = np.triu_indices(Sig.p, k=1)
    magnitudes = np.abs(Sig.entries[iu])
    within = E0.adjacency[iu]
    return magnitudes[within], magnitudes[~within]


def _extremes(within: np.ndarray, between: np.ndarray):
    # empty between-set -> 0, empty within-set -> +inf
    max_between = float(between.max()) if between.size else 0.0
    min_within = float(within.min()) if within.size else float("inf")
    return max_between, min_within


def thresholdability(Sig: CorrelationMatrix, E0: EdgeSet) -> ThresholdabilityReport:
    within, between = _split_magnitudes(Sig, E0)
    max_between, min_within = _extremes(within, between)
    if within.size == 0:
        ok = Sig.p <= 1 or max_between == 0.0
        return ThresholdabilityReport(ok, max_between, min_within, None)
    ok = max_between < min_within
    return ThresholdabilityReport(ok, max_between, min_within, (max_between, min_within) if ok else None)


def sortability(Sig: CorrelationMatrix, E0: EdgeSet) -> float:
    """
    Share of pairs a best-case threshold sorts correctly: within-factor pairs above every
    between-factor magnitude plus between-factor pairs below every within-factor magnitude.
    Ties count as unsorted.
    """
    total = Sig.p * (Sig.p - 1) // 2
    if total == 0:
        return 1.0
    within, between = _split_magnitudes(Sig, E0)
    max_between, min_within = _extremes(within, between)
    sorted_pairs = int(np.count_nonzero(within > max_between)) + int(np.count_nonzero(between < min_within))
    return sorted_pairs / total
