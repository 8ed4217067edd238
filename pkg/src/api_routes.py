import asyncio

from cachetools import LRUCache
from fastapi import APIRouter, File, HTTPException, UploadFile
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, ConfigDict, Field

from src.cli.config import DEFAULT_GAMMA1, DEFAULT_GAMMA2, SweepMode, parse_config
from src.cli.sweep import run_sweep, solve_mode, write_csv
from src.logger.logger import Logger
from src.model.errors import AccessModelError
from src.model.throughput import evaluate
from src.model.types import AccessPolicy, Constraints, SystemParams, ThroughputReport
from src.optimizer.solver import SolveReport
from src.oracle.network import SimConfig, SimResult, simulate_network

logger = Logger(__name__)
router = APIRouter()

# Optimizer results keyed by the canonical request JSON.
optimize_cache: LRUCache = LRUCache(maxsize=256)


class EvaluateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: SystemParams = SystemParams()
    policy: AccessPolicy
    lambda_p: float = Field(ge=0.0, le=1.0)
    constraints: Constraints = Constraints()


class OptimizeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: SystemParams = SystemParams()
    constraints: Constraints = Constraints()
    mode: SweepMode = "adaptive"
    n_starts: int = Field(100, ge=1, le=10_000)
    seed: int = Field(0, ge=0, lt=2**64)
    gamma1_fixed: float = Field(DEFAULT_GAMMA1, ge=0.0)
    gamma2_fixed: float = Field(DEFAULT_GAMMA2, ge=0.0)


@router.post("/evaluate", response_model=ThroughputReport)
async def evaluate_policy(request: EvaluateRequest):
    try:
        return evaluate(request.policy, request.params, request.lambda_p, request.constraints)
    except AccessModelError as e:
        logger.error(f"Error in evaluate: {e.message}")
        raise HTTPException(status_code=400, detail=e.message)
    except Exception as e:
        logger.error(f"Error in evaluate: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/simulate", response_model=SimResult)
async def simulate(config: SimConfig):
    try:
        logger.info("Simulating", slots=config.n_slots, lambda_p=config.lambda_p)
        return await asyncio.to_thread(simulate_network, config)
    except Exception as e:
        logger.error(f"Error in simulate: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/optimize", response_model=SolveReport)
async def optimize_policy(request: OptimizeRequest):
    key = request.model_dump_json()
    cached = optimize_cache.get(key)
    if cached is not None:
        logger.debug("Serving cached optimum", mode=request.mode)
        return cached
    try:
        report = await asyncio.to_thread(
            solve_mode,
            request.mode,
            request.params,
            request.constraints,
            request.n_starts,
            request.seed,
            request.gamma1_fixed,
            request.gamma2_fixed,
        )
    except AccessModelError as e:
        logger.error(f"Error in optimize: {e.message}")
        raise HTTPException(status_code=400, detail=e.message)
    except Exception as e:
        logger.error(f"Error in optimize: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))
    optimize_cache[key] = report
    return report


@router.post("/sweep", response_class=PlainTextResponse)
async def sweep(file: UploadFile = File(...)):
    content = await file.read()
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="config must be UTF-8 text")
    try:
        params, constraints, spec = parse_config(text)
        logger.info(f"Sweep upload: {file.filename}")
        rows = await asyncio.to_thread(run_sweep, spec, params, constraints)
        return PlainTextResponse(write_csv(rows), media_type="text/csv")
    except AccessModelError as e:
        logger.error(f"Error in sweep: {e.message}")
        raise HTTPException(status_code=400, detail=e.message)
    except Exception as e:
        logger.error(f"Error in sweep: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))
