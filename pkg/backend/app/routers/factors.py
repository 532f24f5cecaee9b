import asyncio
import io
from typing import List, Literal, Optional

from fastapi import APIRouter, File, Form, UploadFile
from pydantic import BaseModel

from ..services import redis_service
from ..services.corr_service import CorrelationMatrix, sample_correlation
from ..services.ct_engine import CtConfig, ct_fit, ct_scan, resolve_grid, scan_report
from ..services.io_service import read_corr_csv, read_data_csv, to_jsonable
from ..services.metrics_service import structural_score
from ..services.structure_service import FactorStructure, SingletonPolicy
from ..services.system_watchdog import guard_errors
from ..utils.errors import InputError

router = APIRouter()

# ==========================================
# 1. REQUEST MODELS
# ==========================================


class FitRequest(BaseModel):
    matrix: Optional[List[List[float]]] = None
    data: Optional[List[List[float]]] = None
    n: Optional[int] = None
    kind: Literal["sample", "population"] = "sample"
    grid: str = "unique"
    singletons: SingletonPolicy = SingletonPolicy.DROP
    fit_null: bool = True


class ScanRequest(BaseModel):
    matrix: List[List[float]]
    kind: Literal["sample", "population"] = "sample"
    grid: str = "equi:50"
    singletons: SingletonPolicy = SingletonPolicy.DROP
    truth: Optional[dict] = None


class ScoreRequest(BaseModel):
    estimate: dict
    truth: dict


def _resolve_input(matrix, data, n, kind):
    """(R, n) from either raw data or a correlation matrix plus its sample size."""
    if (matrix is None) == (data is None):
        raise InputError("Provide exactly one of 'matrix' or 'data'.")
    if data is not None:
        R = sample_correlation(data)
        return R, len(data)
    if n is None:
        raise InputError("A correlation matrix needs the sample size 'n'.")
    return CorrelationMatrix.from_array(matrix, kind=kind), n


async def _run_fit(R: CorrelationMatrix, n: int, cfg: CtConfig) -> dict:
    key = redis_service.request_key("ct_fit", {"R": R.to_list(), "n": n, "cfg": cfg})
    cached = await redis_service.redis_client.get_cache(key)
    if cached:
        return cached
    result = await asyncio.to_thread(ct_fit, R, n, None, cfg)
    payload = to_jsonable(result.to_dict())
    await redis_service.redis_client.set_cache(key, payload)
    return payload


# ==========================================
# 2. CT FIT (JSON + CSV UPLOAD)
# ==========================================

@router.post("/fit")
@guard_errors
async def fit_structure(req: FitRequest):
    R, n = _resolve_input(req.matrix, req.data, req.n, req.kind)
    cfg = CtConfig(grid=req.grid, singletons=req.singletons, fit_null=req.fit_null)
    return await _run_fit(R, n, cfg)


@router.post("/fit-csv")
@guard_errors
async def fit_structure_csv(
    file: UploadFile = File(...),
    input_type: Literal["data", "corr"] = Form("data"),
    n: Optional[int] = Form(None),
    kind: Literal["sample", "population"] = Form("sample"),
    grid: str = Form("unique"),
    singletons: SingletonPolicy = Form(SingletonPolicy.DROP),
    fit_null: bool = Form(True),
):
    buffer = io.BytesIO(await file.read())
    if input_type == "data":
        data = read_data_csv(buffer)
        R, n = sample_correlation(data), data.shape[0]
    else:
        if n is None:
            raise InputError("A correlation CSV needs the sample size 'n'.")
        R = read_corr_csv(buffer, kind=kind)
    cfg = CtConfig(grid=grid, singletons=singletons, fit_null=fit_null)
    return await _run_fit(R, n, cfg)


# ==========================================
# 3. STRUCTURE SCAN & SCORING
# ==========================================

@router.post("/scan")
@guard_errors
async def scan_structures(req: ScanRequest):
    R = CorrelationMatrix.from_array(req.matrix, kind=req.kind)
    truth = FactorStructure.from_dict(req.truth) if req.truth else None
    cfg = CtConfig(grid=req.grid, singletons=req.singletons)
    grid = resolve_grid(R, None, cfg)
    records = await asyncio.to_thread(ct_scan, R, grid, cfg)
    return to_jsonable(scan_report(records, grid, truth))


@router.post("/score")
@guard_errors
def score_structure(req: ScoreRequest):
    est = FactorStructure.from_dict(req.estimate)
    truth = FactorStructure.from_dict(req.truth)
    return structural_score(est, truth).to_dict()
