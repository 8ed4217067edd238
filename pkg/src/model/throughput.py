"""
Closed-form success probabilities, service rates and average energies.

Every function here is a pure function of its arguments. Interferer counts
``k`` passed to the secondary success probabilities exclude the tagged user;
the count passed to ``p_succ_pu`` includes every active secondary user.
"""

import math
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import gammaln

from src.model.errors import UnstableQueueError
from src.model.types import (
    AccessPolicy,
    Constraints,
    LinkRates,
    SystemParams,
    ThroughputReport,
)
from src.logger.logger import Logger

logger = Logger(__name__)

# Above this many users the binomial weights are built in log space.
LOG_SPACE_THRESHOLD = 30
FEASIBILITY_TOL = 1e-12


def link_rates(params: SystemParams) -> LinkRates:
    """
    Bandwidth-normalized transmission rates and their SINR thresholds.

    The secondary rate pays the sensing penalty: b / ((T - tau) W), while the
    primary uses the whole slot: b / (T W).
    """
    rs = params.packet_bits / (params.su_airtime * params.bandwidth_W)
    rp = params.packet_bits / (params.slot_T * params.bandwidth_W)
    return LinkRates(
        rs_spectral=rs,
        rp_spectral=rp,
        rs_lin=2.0**rs - 1.0,
        rp_lin=2.0**rp - 1.0,
    )


def binomial_mixture(n: int, p: float, term: Callable[[int], float]) -> float:
    """
    Expectation of ``term(K)`` for K ~ Binomial(n, p).

    Args:
        n (int): Number of trials.
        p (float): Per-trial success probability.
        term (Callable[[int], float]): Value attached to each outcome count.

    Returns:
        float: sum_k C(n, k) p^k (1 - p)^(n - k) term(k).
    """
    if p <= 0.0:
        return term(0)
    if p >= 1.0:
        return term(n)
    if n <= LOG_SPACE_THRESHOLD:
        q = 1.0 - p
        return sum(math.comb(n, k) * p**k * q ** (n - k) * term(k) for k in range(n + 1))

    ks = np.arange(n + 1, dtype=float)
    log_w = (
        gammaln(n + 1.0)
        - gammaln(ks + 1.0)
        - gammaln(n - ks + 1.0)
        + ks * math.log(p)
        + (n - ks) * math.log1p(-p)
    )
    values = np.array([term(k) for k in range(n + 1)], dtype=float)
    return float(np.sum(np.exp(log_w) * values))


def p_succ_su_idle(
    k_interferers: int, gamma1: float, params: SystemParams, rates: LinkRates
) -> float:
    """
    Secondary decoding probability while the PU is idle.

    Returns 0 for a transmission attempted with zero power; ``evaluate`` flags
    such policies as degenerate.
    """
    if gamma1 <= 0.0:
        return 0.0
    noise_term = math.exp(-params.delta_ss * rates.rs_lin * params.noise_N0 / gamma1)
    return noise_term * (1.0 / (1.0 + rates.rs_lin)) ** k_interferers


def p_succ_su_busy(
    k_interferers: int, policy: AccessPolicy, params: SystemParams, rates: LinkRates
) -> float:
    """
    Secondary decoding probability while the PU transmits at gamma_p.
    """
    gamma2 = policy.gamma2
    if gamma2 <= 0.0:
        return 0.0
    noise_term = math.exp(-params.delta_ss * rates.rs_lin * params.noise_N0 / gamma2)
    pu_term = 1.0 / (
        1.0 + params.delta_ss * rates.rs_lin * params.gamma_p / (gamma2 * params.delta_ps)
    )
    return noise_term * pu_term * (1.0 / (1.0 + rates.rs_lin)) ** k_interferers


def p_succ_pu(
    k_active_su: int, policy: AccessPolicy, params: SystemParams, rates: LinkRates
) -> float:
    """
    Primary decoding probability with ``k_active_su`` secondary users on air at gamma2.
    """
    solo = math.exp(-params.delta_pp * rates.rp_lin * params.noise_N0 / params.gamma_p)
    per_su = 1.0 / (
        1.0
        + params.delta_pp * rates.rp_lin * policy.gamma2 / (params.delta_sp * params.gamma_p)
    )
    return solo * per_su**k_active_su


def mu_p(policy: AccessPolicy, params: SystemParams, rates: LinkRates) -> float:
    """
    Mean PU service rate: each of the M_s users is on air with probability a2.
    """
    return binomial_mixture(
        params.num_su_Ms, policy.a2, lambda k: p_succ_pu(k, policy, params, rates)
    )


def pr_pu_empty(lambda_p: float, mu_p: float) -> float:
    """
    Probability that the primary queue is empty.

    Raises:
        UnstableQueueError: If lambda_p > mu_p.
    """
    return 1.0 - _busy_fraction(lambda_p, mu_p)


def _busy_fraction(lambda_p: float, mu_p: float) -> float:
    if lambda_p <= 0.0:
        return 0.0
    if lambda_p > mu_p:
        raise UnstableQueueError(lambda_p, mu_p)
    return lambda_p / mu_p


def _mu_s_at(
    policy: AccessPolicy, params: SystemParams, rates: LinkRates, pr_empty: float
) -> float:
    others = params.num_su_Ms - 1
    idle = 0.0
    busy = 0.0
    if policy.a1 > 0.0 and pr_empty > 0.0:
        idle = policy.a1 * binomial_mixture(
            others, policy.a1, lambda k: p_succ_su_idle(k, policy.gamma1, params, rates)
        )
    if policy.a2 > 0.0 and pr_empty < 1.0:
        busy = policy.a2 * binomial_mixture(
            others, policy.a2, lambda k: p_succ_su_busy(k, policy, params, rates)
        )
    return pr_empty * idle + (1.0 - pr_empty) * busy


def mu_s(
    policy: AccessPolicy, params: SystemParams, rates: LinkRates, lambda_p: float
) -> float:
    """
    Mean service rate of one saturated secondary user.

    The tagged user's own access probability multiplies each branch and the
    binomial runs over the other M_s - 1 users.

    Raises:
        UnstableQueueError: If lambda_p exceeds the PU service rate.
    """
    empty = pr_pu_empty(lambda_p, mu_p(policy, params, rates))
    return _mu_s_at(policy, params, rates, empty)


def avg_energy_su(
    policy: AccessPolicy, params: SystemParams, lambda_p: float, mu_p: float
) -> float:
    """
    Average SU transmit energy per slot, Joules.

    Raises:
        UnstableQueueError: If lambda_p > mu_p.
    """
    rho = _busy_fraction(lambda_p, mu_p)
    return _energy_su_at(policy, params, rho)


def _energy_su_at(policy: AccessPolicy, params: SystemParams, rho: float) -> float:
    density = policy.a1 * policy.gamma1 * (1.0 - rho) + policy.a2 * policy.gamma2 * rho
    return density * params.bandwidth_W * params.su_airtime


def avg_energy_pu(params: SystemParams, lambda_p: float, mu_p: float) -> float:
    """
    Average PU transmit energy per slot, Joules.

    Raises:
        UnstableQueueError: If lambda_p > mu_p.
    """
    rho = _busy_fraction(lambda_p, mu_p)
    return params.gamma_p * params.bandwidth_W * params.slot_T * rho


class OperatingPoint(NamedTuple):
    """Raw analytic quantities for one policy; unstable points are taken at saturation."""

    mu_s: float
    mu_p: float
    pr_empty: float
    energy_su: float
    energy_pu: float
    stable: bool


def operating_point(
    policy: AccessPolicy, params: SystemParams, rates: LinkRates, lambda_p: float
) -> OperatingPoint:
    """
    Evaluate every analytic quantity without raising on instability.

    When lambda_p > mu_p the PU is treated as permanently busy and ``stable``
    is False.
    """
    service = mu_p(policy, params, rates)
    stable = lambda_p <= service
    rho = _busy_fraction(lambda_p, service) if stable else 1.0
    empty = 1.0 - rho
    return OperatingPoint(
        mu_s=_mu_s_at(policy, params, rates, empty),
        mu_p=service,
        pr_empty=empty,
        energy_su=_energy_su_at(policy, params, rho),
        energy_pu=params.gamma_p * params.bandwidth_W * params.slot_T * rho,
        stable=stable,
    )


def is_degenerate(policy: AccessPolicy) -> bool:
    """True when the policy transmits in some state with zero power."""
    return (policy.a1 > 0.0 and policy.gamma1 <= 0.0) or (
        policy.a2 > 0.0 and policy.gamma2 <= 0.0
    )


def evaluate(
    policy: AccessPolicy,
    params: SystemParams,
    lambda_p: float,
    constraints: Constraints,
    rates: Optional[LinkRates] = None,
) -> ThroughputReport:
    """
    Full analytic report for one policy, with the three constraint slacks.

    Infeasibility is reported through ``stable``/``feasible``; this function
    never raises for a violated constraint.
    """
    rates = rates or link_rates(params)
    point = operating_point(policy, params, rates, lambda_p)
    slacks = [
        ("stability", point.mu_p - lambda_p),
        ("energy_pu", constraints.e_th_pu - point.energy_pu),
        ("energy_su", constraints.e_th_su - point.energy_su),
    ]
    degenerate = is_degenerate(policy)
    if degenerate:
        logger.warning(
            "Policy transmits with zero power",
            a1=policy.a1,
            a2=policy.a2,
            gamma1=policy.gamma1,
            gamma2=policy.gamma2,
        )
    return ThroughputReport(
        lambda_p=lambda_p,
        mu_s=point.mu_s,
        mu_p=point.mu_p,
        pr_empty=point.pr_empty,
        energy_su=point.energy_su,
        energy_pu=point.energy_pu,
        stable=point.stable,
        feasible=point.stable and all(value >= -FEASIBILITY_TOL for _, value in slacks),
        degenerate=degenerate,
        slacks=slacks,
    )
