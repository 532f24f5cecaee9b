import asyncio
import io
import itertools
import logging
from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .clique_service import extend_to_maximal
from .corr_service import sample_correlation
from .ct_engine import CtConfig, best_candidate_vs_truth, ct_fit, ct_scan
from .estimation_engine import OptimConfig, implied_sigma, test_loglik
from .metrics_service import sortability, structural_score, thresholdability
from .simulation_service import SimConfig, derive_seed, simulate
from .structure_service import FactorStructure, SingletonPolicy
from ..utils.errors import CTError

logger = logging.getLogger("Bench")

SCHEMA_VERSION = 1

METRICS = (
    "hd",
    "f1",
    "d_hat",
    "tli",
    "rmsea",
    "test_loglik",
    "models_tested",
    "pop_thresholdable",
    "pop_sortability",
    "sample_thresholdable",
    "sample_sortability",
    "clique_size_ratio",
)

# ==========================================
# 1. SPEC & REPORT
# ==========================================


class BenchSpec(BaseModel):
    """
    A grid of simulation cells (d x n x alpha, or d x n x beta) with `replicates` seeded runs each.
    mode: fit runs the full pipeline, scan skips estimation, auto picks scan when p > n,
    diagnostics only computes thresholdability and sortability.
    """
    model_config = ConfigDict(frozen=True)

    scheme: Literal["alpha_study", "beta_study"] = "alpha_study"
    d: List[int] = Field(default_factory=lambda: [3])
    n: List[int] = Field(default_factory=lambda: [1000])
    alpha: List[float] = Field(default_factory=lambda: [0.0])
    beta: List[float] = Field(default_factory=lambda: [0.0])
    children_per_factor: int = Field(5, ge=1)
    loading_range: Tuple[float, float] = (0.6, 0.8)
    phi_range: Tuple[float, float] = (0.6, 0.8)
    replicates: int = Field(20, ge=1)
    seed: int = Field(0, ge=0)
    mode: Literal["auto", "fit", "scan", "diagnostics"] = "auto"
    level: Literal["sample", "population"] = "sample"
    grid: Optional[str] = None
    singletons: SingletonPolicy = SingletonPolicy.DROP
    optim: Optional[OptimConfig] = None
    workers: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _non_empty(self):
        if not self.d or not self.n or not self.alpha or not self.beta:
            raise ValueError("d, n, alpha and beta grids must be non-empty.")
        return self

    def cells(self) -> List[SimConfig]:
        """One base SimConfig per grid cell; its seed is the cell seed."""
        varied = self.alpha if self.scheme == "alpha_study" else self.beta
        out = []
        for idx, (d, n, v) in enumerate(itertools.product(self.d, self.n, varied)):
            out.append(
                SimConfig(
                    d=d,
                    n=n,
                    alpha=v if self.scheme == "alpha_study" else 0.0,
                    beta=v if self.scheme == "beta_study" else 0.0,
                    children_per_factor=self.children_per_factor,
                    loading_range=self.loading_range,
                    phi_range=self.phi_range,
                    scheme=self.scheme,
                    seed=derive_seed(self.seed, idx),
                )
            )
        return out


class BenchReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    spec: BenchSpec
    cells: List[dict]
    rows: List[dict]

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    def to_tsv(self) -> str:
        """One line per cell: grid coordinates, failure count, mean and sd of every metric."""
        flat = []
        for cell in self.cells:
            line = {k: cell[k] for k in ("cell", "d", "n", "alpha", "beta", "p", "mode", "replicates", "failures")}
            for name, agg in cell["metrics"].items():
                line[f"{name}_mean"] = agg["mean"]
                line[f"{name}_sd"] = agg["sd"]
            flat.append(line)
        buf = io.StringIO()
        pd.DataFrame(flat).to_csv(buf, sep="\t", index=False, na_rep="NA")
        return buf.getvalue()


# ==========================================
# 2. ONE REPLICATE
# ==========================================

def mean_clique_size(S: FactorStructure) -> float:
    """
    Mean size of the maximal cliques of S's own graph that hold a factor's children:
    each child set is grown to a maximal clique, duplicates counted once.
    With no factors every vertex is its own maximal clique.
    """
    G = S.edge_set()
    cliques = {extend_to_maximal(G, c) for c in S.child_sets() if c}
    if not cliques:
        return 1.0
    return float(np.mean([len(c) for c in cliques]))


def cell_mode(spec: BenchSpec, cfg: SimConfig) -> str:
    if spec.mode != "auto":
        return spec.mode
    return "scan" if cfg.p > cfg.n else "fit"


def run_replicate(spec: BenchSpec, cell_index: int, cell: SimConfig, replicate: int) -> dict:
    """generate -> (sample) -> ct_fit or ct_scan -> score. Failures become rows, never exceptions."""
    cfg = cell.model_copy(update={"seed": derive_seed(cell.seed, replicate)})
    mode = cell_mode(spec, cfg)
    row = {"cell": cell_index, "replicate": replicate, "seed": cfg.seed, "status": "ok", "error": None}
    row.update({name: None for name in METRICS})

    try:
        sample_level = spec.level == "sample"
        bundle = simulate(cfg, with_data=sample_level, with_heldout=sample_level and mode == "fit")
        truth = bundle.structure
        E0 = truth.edge_set()
        Sig = implied_sigma(bundle.theta)

        pop = thresholdability(Sig, E0)
        row["pop_thresholdable"] = float(pop.thresholdable)
        row["pop_sortability"] = sortability(Sig, E0)

        R = Sig
        if sample_level:
            R = sample_correlation(bundle.data)
            row["sample_thresholdable"] = float(thresholdability(R, E0).thresholdable)
            row["sample_sortability"] = sortability(R, E0)
        if mode == "diagnostics":
            return row

        grid = spec.grid or ("unique" if mode == "fit" else "equi:50")
        ct_cfg = CtConfig(grid=grid, singletons=spec.singletons, optim=spec.optim)
        if mode == "fit":
            result = ct_fit(R, cfg.n, cfg=ct_cfg)
            chosen = result.selected
            est = chosen.structure
            score = structural_score(est, truth)
            row.update(hd=score.hd, f1=score.f1, models_tested=result.models_tested)
            row.update(tli=chosen.fit.tli, rmsea=chosen.fit.rmsea)
            if bundle.heldout is not None:
                row["test_loglik"] = test_loglik(chosen.fit, bundle.heldout)
        else:
            records = ct_scan(R, cfg=ct_cfg)
            idx, hd, f1 = best_candidate_vs_truth(records, truth)
            est = records[idx].structure
            row.update(hd=hd, f1=f1, models_tested=len(records))

        row["d_hat"] = est.d
        row["clique_size_ratio"] = mean_clique_size(est) / mean_clique_size(truth)
    except CTError as e:
        logger.warning(f"⚠️ Cell {cell_index} replicate {replicate} failed: {e.message}")
        row["status"] = "failed"
        row["error"] = f"{type(e).__name__}: {e.message}"
    return row


# ==========================================
# 3. AGGREGATION
# ==========================================

def aggregate(spec: BenchSpec, cells: List[SimConfig], rows: List[dict]) -> List[dict]:
    frame = pd.DataFrame(rows, columns=["cell", "replicate", "status", *METRICS])
    frame[list(METRICS)] = frame[list(METRICS)].apply(pd.to_numeric, errors="coerce")
    out = []
    for idx, cell in enumerate(cells):
        sub = frame[frame["cell"] == idx]
        ok = sub[sub["status"] == "ok"]
        metrics = {}
        for name in METRICS:
            col = ok[name].dropna()
            metrics[name] = {
                "mean": float(col.mean()) if len(col) else None,
                "sd": float(col.std(ddof=1)) if len(col) > 1 else None,
                "count": int(len(col)),
            }
        out.append(
            {
                "cell": idx,
                "d": cell.d,
                "n": cell.n,
                "alpha": cell.alpha,
                "beta": cell.beta,
                "p": cell.p,
                "mode": cell_mode(spec, cell),
                "config": cell.model_dump(mode="json"),
                "replicates": int(len(sub)),
                "failures": int((sub["status"] != "ok").sum()),
                "metrics": metrics,
            }
        )
    return out


# ==========================================
# 4. ORCHESTRATION
# ==========================================

async def run_bench_async(spec: BenchSpec, workers: int = None) -> BenchReport:
    """Replicates run in worker threads; rows come back ordered by (cell, replicate)."""
    if workers is None:
        from ..config import BENCH_WORKERS
        workers = spec.workers or BENCH_WORKERS
    sem = asyncio.Semaphore(workers)
    cells = spec.cells()

    async def one(idx: int, cell: SimConfig, rep: int) -> dict:
        async with sem:
            return await asyncio.to_thread(run_replicate, spec, idx, cell, rep)

    jobs = [one(idx, cell, rep) for idx, cell in enumerate(cells) for rep in range(spec.replicates)]
    logger.info(f"🚀 Bench: {len(cells)} cells x {spec.replicates} replicates on {workers} workers")
    rows = await asyncio.gather(*jobs)
    rows = sorted(rows, key=lambda r: (r["cell"], r["replicate"]))

    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        logger.warning(f"⚠️ Bench finished with {failed} failed replicates")
    return BenchReport(spec=spec, cells=aggregate(spec, cells, rows), rows=rows)


def run_bench(spec: BenchSpec, workers: int = None) -> BenchReport:
    return asyncio.run(run_bench_async(spec, workers))
