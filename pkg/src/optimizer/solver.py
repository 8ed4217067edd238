"""
Multi-start maximization of the secondary service rate.

Each start is a bounded Nelder-Mead search on the negated objective in a
unit-cube parameterization of the policy:

    a1 = u0,  a2 = u0 * u1,  gamma1 = gamma_max * u2,  gamma2 = gamma_max * u3

so a2 <= a1 and the power box hold for every point the simplex visits.
Constraint violations are scored 1 + (normalized violation), which is worse
than any feasible point (feasible scores lie in [-1, 0]).
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import repeat
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize

from src.logger.logger import Logger
from src.model.errors import InfeasibleProblemError
from src.model.throughput import evaluate, link_rates, operating_point
from src.model.types import (
    AccessPolicy,
    Constraints,
    LinkRates,
    SystemParams,
    ThroughputReport,
)
from src.oracle.streams import Purpose, StreamFactory

logger = Logger(__name__)

# Objectives closer than this are ties, resolved by AccessPolicy.key().
TIE_TOL = 1e-12
# Keeps a polished power just inside the SU energy cap.
CAP_MARGIN = 1e-12
REPAIR_STEPS = 60


class SolveMode(str, Enum):
    ADAPTIVE = "adaptive-power"
    FIXED = "fixed-power"
    CONVENTIONAL = "conventional"


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    DEGENERATE = "degenerate"


class SolverOptions(BaseModel):
    """Numerical settings of the local searches."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    xatol: float = Field(1e-9, gt=0)
    fatol: float = Field(1e-12, gt=0)
    max_evals: int = Field(2000, gt=0)
    restarts: int = Field(1, ge=0)
    initial_step: float = Field(0.1, gt=0, le=0.5)
    start_tolerance: float = Field(1e-4, ge=0)
    workers: int = Field(1, ge=1)


class SolveReport(BaseModel):
    """Best policy over all starts plus restart statistics."""

    model_config = ConfigDict(frozen=True)

    best_policy: AccessPolicy
    best_mu_s: float
    n_starts: int
    n_feasible_starts: int
    starts_within_tolerance_of_best: int
    mode: SolveMode
    status: SolveStatus
    report: ThroughputReport

    def require_feasible(self) -> "SolveReport":
        if self.status is SolveStatus.INFEASIBLE:
            raise InfeasibleProblemError(
                f"no feasible {self.mode.value} policy for lambda_p={self.report.lambda_p!r}"
            )
        return self


@dataclass(frozen=True)
class _Problem:
    params: SystemParams
    rates: LinkRates
    constraints: Constraints
    mode: SolveMode
    gamma1_fixed: float = 0.0
    gamma2_fixed: float = 0.0

    @property
    def dimension(self) -> int:
        return {SolveMode.ADAPTIVE: 4, SolveMode.FIXED: 2, SolveMode.CONVENTIONAL: 1}[self.mode]

    def decode(self, u: np.ndarray) -> AccessPolicy:
        u = np.clip(u, 0.0, 1.0)
        a1 = float(u[0])
        if self.mode is SolveMode.CONVENTIONAL:
            values = (a1, 0.0, self.gamma1_fixed, 0.0)
        elif self.mode is SolveMode.FIXED:
            values = (a1, a1 * float(u[1]), self.gamma1_fixed, self.gamma2_fixed)
        else:
            gamma_max = self.constraints.gamma_max
            values = (a1, a1 * float(u[1]), gamma_max * float(u[2]), gamma_max * float(u[3]))
        # Invariants hold by construction of the parameterization.
        return AccessPolicy.model_construct(
            a1=values[0], a2=values[1], gamma1=values[2], gamma2=values[3]
        )

    def violation(self, policy: AccessPolicy) -> Tuple[float, float]:
        """Returns (normalized total violation, mu_s)."""
        c = self.constraints
        point = operating_point(policy, self.params, self.rates, c.lambda_p)
        total = max(0.0, c.lambda_p - point.mu_p)
        total += max(0.0, point.energy_su - c.e_th_su) / max(c.e_th_su, 1e-300)
        total += max(0.0, point.energy_pu - c.e_th_pu) / max(c.e_th_pu, 1e-300)
        return total, point.mu_s

    def objective(self, u: np.ndarray) -> float:
        total, service = self.violation(self.decode(u))
        return -service if total <= 0.0 else 1.0 + total


def _repair(problem: _Problem, u: np.ndarray) -> np.ndarray:
    """
    Shrink an infeasible start toward the silent policy until it is feasible.

    Adaptive starts scale both powers; pinned-power starts scale the access
    probabilities. Scale 0 is feasible whenever the problem is.
    """
    if problem.objective(u) <= 0.0:
        return u

    def scaled(t: float) -> np.ndarray:
        v = u.copy()
        if problem.mode is SolveMode.ADAPTIVE:
            v[2:] *= t
        else:
            v[0] *= t
        return v

    lo, hi = 0.0, 1.0
    for _ in range(REPAIR_STEPS):
        mid = 0.5 * (lo + hi)
        if problem.objective(scaled(mid)) <= 0.0:
            lo = mid
        else:
            hi = mid
    return scaled(lo)


def _polish_gamma1(problem: _Problem, u: np.ndarray) -> np.ndarray:
    """
    Raise gamma1 to the largest value the SU energy cap and power box allow.

    mu_s is nondecreasing in gamma1 and gamma1 enters no other constraint.
    """
    if problem.mode is not SolveMode.ADAPTIVE:
        return u
    policy = problem.decode(u)
    c, params = problem.constraints, problem.params
    point = operating_point(policy, params, problem.rates, c.lambda_p)
    rho = 1.0 - point.pr_empty
    if policy.a1 <= 0.0 or rho >= 1.0 or not point.stable:
        return u
    budget = c.e_th_su / (params.bandwidth_W * params.su_airtime)
    room = budget - policy.a2 * policy.gamma2 * rho
    cap = room / (policy.a1 * (1.0 - rho)) * (1.0 - CAP_MARGIN)
    gamma1 = min(c.gamma_max, max(policy.gamma1, cap))
    candidate = u.copy()
    candidate[2] = gamma1 / c.gamma_max
    if problem.objective(candidate) <= problem.objective(u):
        return candidate
    return u


def _initial_simplex(u: np.ndarray, step: float) -> np.ndarray:
    vertices = [u.copy()]
    for i in range(u.size):
        v = u.copy()
        v[i] = v[i] + step if v[i] + step <= 1.0 else v[i] - step
        vertices.append(v)
    return np.array(vertices)


def _local_search(problem: _Problem, start: np.ndarray, options: SolverOptions) -> np.ndarray:
    u = _repair(problem, np.asarray(start, dtype=float))
    bounds = [(0.0, 1.0)] * problem.dimension
    for _ in range(1 + options.restarts):
        result = minimize(
            problem.objective,
            u,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "xatol": options.xatol,
                "fatol": options.fatol,
                "maxfev": options.max_evals,
                "initial_simplex": _initial_simplex(u, options.initial_step),
            },
        )
        candidate = np.clip(result.x, 0.0, 1.0)
        if problem.objective(candidate) <= problem.objective(u):
            u = candidate
        u = _polish_gamma1(problem, u)
    return u


def _canonical(problem: _Problem, policy: AccessPolicy) -> AccessPolicy:
    """
    Drop access and power that cannot change mu_s.

    A busy-state branch with zero power, or with no weight (lambda_p == 0),
    contributes nothing, so a2 goes to 0. Idle access at zero power reduces
    to a1 == a2. Pinned powers stay as given; free powers of a silent branch
    go to 0.
    """
    a1, a2, gamma1, gamma2 = policy.a1, policy.a2, policy.gamma1, policy.gamma2
    if gamma2 == 0.0 or problem.constraints.lambda_p == 0.0:
        a2 = 0.0
    if gamma1 == 0.0:
        a1 = a2
    if problem.mode is SolveMode.ADAPTIVE:
        gamma1 = gamma1 if a1 > 0.0 else 0.0
        gamma2 = gamma2 if a2 > 0.0 else 0.0
    return AccessPolicy.model_construct(a1=a1, a2=a2, gamma1=gamma1, gamma2=gamma2)


def _solve_start(
    problem: _Problem, start: np.ndarray, options: SolverOptions
) -> Tuple[AccessPolicy, float, bool]:
    u = _local_search(problem, start, options)
    policy = problem.decode(u)
    total, service = problem.violation(policy)
    canonical = _canonical(problem, policy)
    if canonical != policy:
        canonical_total, canonical_service = problem.violation(canonical)
        if canonical_total <= 0.0 and (
            total > 0.0 or _better(canonical_service, canonical, (service, policy))
        ):
            return canonical, canonical_service, True
    return policy, service, total <= 0.0


def _better(
    service: float, policy: AccessPolicy, best: Optional[Tuple[float, AccessPolicy]]
) -> bool:
    if best is None:
        return True
    best_service, best_policy = best
    if service > best_service + TIE_TOL:
        return True
    return abs(service - best_service) <= TIE_TOL and policy.key() < best_policy.key()


@Logger.log_execution(logging.DEBUG)
def _solve(
    problem: _Problem, n_starts: int, seed: int, options: Optional[SolverOptions]
) -> SolveReport:
    options = options or SolverOptions()
    c = problem.constraints
    silent = AccessPolicy.silent()

    def finish(
        policy: AccessPolicy, service: float, feasible: int, within: int, status: SolveStatus
    ) -> SolveReport:
        report = evaluate(policy, problem.params, c.lambda_p, c, problem.rates)
        return SolveReport(
            best_policy=policy,
            best_mu_s=service,
            n_starts=n_starts,
            n_feasible_starts=feasible,
            starts_within_tolerance_of_best=within,
            mode=problem.mode,
            status=status,
            report=report,
        )

    if problem.violation(silent)[0] > 0.0:
        logger.warning(
            "No policy can satisfy the constraints",
            mode=problem.mode.value,
            lambda_p=c.lambda_p,
        )
        return finish(silent, 0.0, 0, 0, SolveStatus.INFEASIBLE)

    rng = StreamFactory(seed).stream(Purpose.OPTIMIZER_STARTS, problem.dimension)
    starts = rng.random((n_starts, problem.dimension))

    if options.workers > 1:
        with ProcessPoolExecutor(max_workers=options.workers) as pool:
            outcomes: List[Tuple[AccessPolicy, float, bool]] = list(
                pool.map(_solve_start, repeat(problem), starts, repeat(options))
            )
    else:
        outcomes = [_solve_start(problem, start, options) for start in starts]

    best: Optional[Tuple[float, AccessPolicy]] = None
    for policy, service, feasible in outcomes:
        if feasible and _better(service, policy, best):
            best = (service, policy)

    feasible_count = sum(1 for _, _, feasible in outcomes if feasible)
    if best is None or best[0] <= 0.0:
        logger.info("Energy or power budget leaves no room to transmit", mode=problem.mode.value)
        return finish(silent, 0.0, feasible_count, feasible_count, SolveStatus.DEGENERATE)

    best_service, best_policy = best
    within = sum(
        1
        for _, service, feasible in outcomes
        if feasible and service >= best_service - options.start_tolerance
    )
    logger.debug(
        "Solved",
        mode=problem.mode.value,
        lambda_p=c.lambda_p,
        mu_s=best_service,
        within=within,
    )
    return finish(
        AccessPolicy(**best_policy.model_dump()),
        best_service,
        feasible_count,
        within,
        SolveStatus.OPTIMAL,
    )


def optimize(
    params: SystemParams,
    constraints: Constraints,
    n_starts: int = 1000,
    seed: int = 0,
    options: Optional[SolverOptions] = None,
) -> SolveReport:
    """
    Maximize mu_s over (a1, a2, gamma1, gamma2).

    Args:
        params (SystemParams): Network constants.
        constraints (Constraints): Arrival rate, energy caps and power box.
        n_starts (int): Number of independent local searches.
        seed (int): Seed for the start points.
        options (Optional[SolverOptions]): Local-search settings.

    Returns:
        SolveReport: Best feasible policy; ``status`` reports infeasibility.
    """
    problem = _Problem(params, link_rates(params), constraints, SolveMode.ADAPTIVE)
    return _solve(problem, n_starts, seed, options)


def optimize_fixed_power(
    params: SystemParams,
    constraints: Constraints,
    gamma1_fixed: float,
    gamma2_fixed: float,
    n_starts: int = 1000,
    seed: int = 0,
    options: Optional[SolverOptions] = None,
) -> SolveReport:
    """
    Maximize mu_s over (a1, a2) with both power levels pinned.
    """
    problem = _Problem(
        params, link_rates(params), constraints, SolveMode.FIXED, gamma1_fixed, gamma2_fixed
    )
    return _solve(problem, n_starts, seed, options)


def conventional_baseline(
    params: SystemParams,
    constraints: Constraints,
    gamma1_fixed: float,
    n_starts: int = 1000,
    seed: int = 0,
    options: Optional[SolverOptions] = None,
) -> SolveReport:
    """
    Secondary users stay silent while the PU is busy; search a1 at a fixed gamma1.
    """
    problem = _Problem(
        params, link_rates(params), constraints, SolveMode.CONVENTIONAL, gamma1_fixed, 0.0
    )
    return _solve(problem, n_starts, seed, options)
