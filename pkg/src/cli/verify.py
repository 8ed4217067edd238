"""
Closed-form versus Monte Carlo check of the three success probabilities.
"""

import math
from itertools import product
from typing import Callable, Dict, List, Literal, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from src.cli.config import DEFAULT_GAMMA1, DEFAULT_GAMMA2
from src.logger.logger import Logger
from src.model.throughput import link_rates, p_succ_pu, p_succ_su_busy, p_succ_su_idle
from src.model.types import AccessPolicy, LinkRates, SystemParams
from src.oracle.channel import ChannelScenario, mc_success_prob

logger = Logger(__name__)

ScenarioName = Literal["su_idle", "su_busy", "pu"]

INTERFERER_COUNTS = (0, 1, 2, 4)
POWER_SCALES = (0.5, 1.0, 2.0)
SIGMAS = 3.0
WIDE_STD_ERR = 0.01
REQUIRED_PASS_RATE = 0.95


class VerificationPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario: ScenarioName
    k: int
    power: float
    closed_form: float
    estimate: float
    std_err: float
    z: float
    wide: bool
    passed: bool


class VerificationReport(BaseModel):
    """Per-point comparisons plus the overall verdict."""

    model_config = ConfigDict(frozen=True)

    n_samples: int
    points: List[VerificationPoint]
    pass_rate: float
    passed: bool

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([point.model_dump() for point in self.points])


Builder = Tuple[
    Callable[[int, float, SystemParams, LinkRates], float],
    Callable[[int, float, SystemParams, LinkRates], ChannelScenario],
]


def _builders() -> Dict[str, Builder]:
    def busy_policy(gamma: float) -> AccessPolicy:
        return AccessPolicy(a1=1.0, a2=1.0, gamma1=gamma, gamma2=gamma)

    return {
        "su_idle": (
            lambda k, g, params, rates: p_succ_su_idle(k, g, params, rates),
            ChannelScenario.su_idle,
        ),
        "su_busy": (
            lambda k, g, params, rates: p_succ_su_busy(k, busy_policy(g), params, rates),
            ChannelScenario.su_busy,
        ),
        "pu": (
            lambda k, g, params, rates: p_succ_pu(k, busy_policy(g), params, rates),
            ChannelScenario.pu,
        ),
    }


def _point_seed(seed: int, index: int) -> int:
    state = np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)
    return int(state[0])


def _compare(
    scenario: ScenarioName, k: int, power: float, closed_form: float, estimate: float, n: int
) -> VerificationPoint:
    std_err = math.sqrt(closed_form * (1.0 - closed_form) / n)
    error = estimate - closed_form
    if std_err == 0.0:
        # Certain events: the sample must match exactly.
        z = 0.0 if error == 0.0 else math.copysign(math.inf, error)
        passed = error == 0.0
    else:
        z = error / std_err
        # Half a count of continuity correction keeps small samples honest.
        passed = abs(error) <= SIGMAS * std_err + 0.5 / n
    return VerificationPoint(
        scenario=scenario,
        k=k,
        power=power,
        closed_form=closed_form,
        estimate=estimate,
        std_err=std_err,
        z=z,
        wide=std_err > WIDE_STD_ERR,
        passed=passed,
    )


@Logger.log_execution()
def verify(params: SystemParams, n_samples: int = 1_000_000, seed: int = 0) -> VerificationReport:
    """
    Compare every closed form with its Monte Carlo estimate on a fixed grid.

    The grid spans k in {0, 1, 2, 4}, the three receiver scenarios and power
    levels of 0.5x, 1x and 2x the reference gamma1 (idle) or gamma2 (busy, PU).

    Args:
        params (SystemParams): Network constants.
        n_samples (int): Samples per grid point.
        seed (int): Master seed; each point gets its own derived stream.

    Returns:
        VerificationReport: Passes when at least 95% of points lie within
        three standard errors.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")

    rates = link_rates(params)
    builders = _builders()
    points: List[VerificationPoint] = []
    grid = product(builders, INTERFERER_COUNTS, POWER_SCALES)
    for index, (name, k, scale) in enumerate(grid):
        reference = DEFAULT_GAMMA1 if name == "su_idle" else DEFAULT_GAMMA2
        power = reference * scale
        closed, build = builders[name]
        mc = mc_success_prob(build(k, power, params, rates), n_samples, _point_seed(seed, index))
        point = _compare(name, k, power, closed(k, power, params, rates), mc.estimate, n_samples)
        if not point.passed:
            logger.warning("Closed form outside tolerance", scenario=name, k=k, z=point.z)
        points.append(point)

    pass_rate = sum(point.passed for point in points) / len(points)
    wide = sum(point.wide for point in points)
    if wide:
        logger.info("Confidence intervals are wide at this sample size", points=wide)
    return VerificationReport(
        n_samples=n_samples,
        points=points,
        pass_rate=pass_rate,
        passed=pass_rate >= REQUIRED_PASS_RATE,
    )
