"""
Sweep harness: solve every grid point and emit one CSV row per point.
"""

import io
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from typing import Any, Iterable, List, Optional, TextIO, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict

from src.cli.config import DEFAULT_GAMMA1, DEFAULT_GAMMA2, SweepMode, SweepSpec
from src.logger.logger import Logger
from src.model.types import Constraints, SystemParams
from src.optimizer.solver import (
    SolveReport,
    SolverOptions,
    SolveStatus,
    conventional_baseline,
    optimize,
    optimize_fixed_power,
)
from src.oracle.network import SimConfig, simulate_network

logger = Logger(__name__)

CSV_COLUMNS = [
    "lambda_p",
    "ms",
    "e_th_su",
    "mode",
    "a1",
    "a2",
    "gamma1",
    "gamma2",
    "mu_s_analytic",
    "mu_p",
    "e_su",
    "e_pu",
    "feasible",
    "mu_s_sim",
    "sim_rel_err",
]


class SweepRow(BaseModel):
    """One solved grid point."""

    model_config = ConfigDict(frozen=True)

    lambda_p: float
    ms: int
    e_th_su: float
    mode: str
    a1: float
    a2: float
    gamma1: float
    gamma2: float
    mu_s_analytic: float
    mu_p: float
    e_su: float
    e_pu: float
    feasible: bool
    mu_s_sim: Optional[float] = None
    sim_rel_err: Optional[float] = None


GridPoint = Tuple[float, int, float, str]


def grid_points(spec: SweepSpec) -> List[GridPoint]:
    """Grid in emission order: lambda_p outermost, then M_s, e_th_su, mode."""
    return list(product(spec.lambda_grid, spec.ms_list, spec.e_th_su_list, spec.modes))


def solve_mode(
    mode: SweepMode,
    params: SystemParams,
    constraints: Constraints,
    n_starts: int,
    seed: int,
    gamma1_fixed: float = DEFAULT_GAMMA1,
    gamma2_fixed: float = DEFAULT_GAMMA2,
    options: Optional[SolverOptions] = None,
) -> SolveReport:
    """Dispatch one optimizer instance by sweep mode name."""
    if mode == "adaptive":
        return optimize(params, constraints, n_starts, seed, options)
    if mode == "fixed":
        return optimize_fixed_power(
            params, constraints, gamma1_fixed, gamma2_fixed, n_starts, seed, options
        )
    return conventional_baseline(params, constraints, gamma1_fixed, n_starts, seed, options)


def solve_point(
    point: GridPoint, spec: SweepSpec, params: SystemParams, constraints: Constraints
) -> SolveReport:
    lambda_p, ms, e_th_su, mode = point
    return solve_mode(
        mode,
        params.model_copy(update={"num_su_Ms": ms}),
        constraints.model_copy(update={"lambda_p": lambda_p, "e_th_su": e_th_su}),
        spec.n_starts,
        spec.seed,
        spec.gamma1_fixed,
        spec.gamma2_fixed,
        SolverOptions(start_tolerance=spec.start_tolerance),
    )


def _row_for(
    point: GridPoint, spec: SweepSpec, params: SystemParams, constraints: Constraints
) -> SweepRow:
    lambda_p, ms, e_th_su, mode = point
    solved = solve_point(point, spec, params, constraints)
    policy, report = solved.best_policy, solved.report
    feasible = solved.status is not SolveStatus.INFEASIBLE and report.feasible

    mu_s_sim: Optional[float] = None
    sim_rel_err: Optional[float] = None
    if spec.sim_validate and feasible:
        sim = simulate_network(
            SimConfig(
                n_slots=spec.sim_slots,
                seed=spec.seed,
                lambda_p=lambda_p,
                policy=policy,
                params=params.model_copy(update={"num_su_Ms": ms}),
            )
        )
        mu_s_sim = sim.emp_mu_s
        if report.mu_s > 0.0:
            sim_rel_err = abs(sim.emp_mu_s - report.mu_s) / report.mu_s

    if not feasible:
        logger.warning("Grid point infeasible", lambda_p=lambda_p, ms=ms, mode=mode)

    return SweepRow(
        lambda_p=lambda_p,
        ms=ms,
        e_th_su=e_th_su,
        mode=mode,
        a1=policy.a1,
        a2=policy.a2,
        gamma1=policy.gamma1,
        gamma2=policy.gamma2,
        mu_s_analytic=report.mu_s,
        mu_p=report.mu_p,
        e_su=report.energy_su,
        e_pu=report.energy_pu,
        feasible=feasible,
        mu_s_sim=mu_s_sim,
        sim_rel_err=sim_rel_err,
    )


def _row_task(args: Tuple[GridPoint, SweepSpec, SystemParams, Constraints]) -> SweepRow:
    return _row_for(*args)


@Logger.log_execution()
def run_sweep(spec: SweepSpec, params: SystemParams, constraints: Constraints) -> List[SweepRow]:
    """
    Solve every grid point of ``spec``.

    Infeasible points are recorded in their row; the sweep never aborts on
    them. Rows come back in grid order regardless of ``spec.workers``.
    """
    tasks = [(point, spec, params, constraints) for point in grid_points(spec)]
    logger.info("Starting sweep", points=len(tasks), workers=spec.workers)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(_row_task, tasks))
    return [_row_task(task) for task in tasks]


def format_value(value: Any) -> str:
    """Shortest round-trip text for floats, lowercase booleans, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_frame(rows: Iterable[SweepRow]) -> pd.DataFrame:
    records = [{k: format_value(v) for k, v in row.model_dump().items()} for row in rows]
    return pd.DataFrame.from_records(records, columns=CSV_COLUMNS)


def write_csv(rows: Iterable[SweepRow], out: Optional[TextIO] = None) -> str:
    """
    Render rows as CSV; also writes to ``out`` when given.

    Returns:
        str: The CSV text.
    """
    buffer = io.StringIO()
    rows_frame(rows).to_csv(buffer, index=False, lineterminator="\n")
    text = buffer.getvalue()
    if out is not None:
        out.write(text)
    return text
