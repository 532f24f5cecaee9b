import asyncio

from fastapi import APIRouter
from pydantic import BaseModel

from ..services import redis_service
from ..services.bench_engine import BenchSpec, run_bench_async
from ..services.estimation_engine import implied_sigma
from ..services.io_service import to_jsonable
from ..services.simulation_service import SimConfig, simulate
from ..services.system_watchdog import guard_errors

router = APIRouter()


class SimulateRequest(BaseModel):
    config: SimConfig = SimConfig()
    include_data: bool = False


@router.post("/simulate")
@guard_errors
async def simulate_model(req: SimulateRequest):
    """Structure, parameters and implied correlation for a seeded config; data on request."""
    bundle = await asyncio.to_thread(simulate, req.config, req.include_data, False)
    out = {
        "config": req.config,
        "structure": bundle.structure.to_dict(),
        "theta": bundle.theta.to_dict(),
        "sigma": implied_sigma(bundle.theta).to_list(),
    }
    if req.include_data:
        out["data"] = bundle.data
    return to_jsonable(out)


@router.post("/bench")
@guard_errors
async def run_benchmark(spec: BenchSpec):
    key = redis_service.request_key("bench", spec)
    cached = await redis_service.redis_client.get_cache(key)
    if cached:
        return cached
    report = await run_bench_async(spec)
    payload = to_jsonable(report.to_dict())
    await redis_service.redis_client.set_cache(key, payload)
    return payload
