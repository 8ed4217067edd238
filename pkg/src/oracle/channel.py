"""
Monte Carlo channel-gain oracle.

Draws block Rayleigh fading gains (exponential power gains with mean
1/delta) and counts how often the receiver's SINR clears its threshold. Used
to cross-check the closed forms in ``src.model.throughput``.
"""

import math
from typing import Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.model.throughput import link_rates
from src.model.types import LinkRates, SystemParams
from src.oracle.streams import Purpose, StreamFactory, exponential

CHUNK = 1 << 18


class ChannelScenario(BaseModel):
    """
    One receiver, its own transmitter and a set of active interferers.

    For an ``su`` receiver the interferers are other secondary users whose
    gains share the secondary rate delta_ss, plus the PU (rate delta_ps) when
    ``pu_active``. For a ``pu`` receiver the own gain has rate delta_pp and
    secondary interferers have rate delta_sp.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    receiver: Literal["su", "pu"] = "su"
    n_su_interferers: int = Field(ge=0)
    pu_active: bool = False
    own_power: float = Field(ge=0.0)
    interferer_power: float = Field(ge=0.0)
    params: SystemParams
    threshold: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _pu_is_not_its_own_interferer(self) -> "ChannelScenario":
        if self.receiver == "pu" and self.pu_active:
            raise ValueError("pu_active applies to secondary receivers only")
        return self

    @classmethod
    def su_idle(
        cls, k: int, gamma1: float, params: SystemParams, rates: Optional[LinkRates] = None
    ) -> "ChannelScenario":
        rates = rates or link_rates(params)
        return cls(
            n_su_interferers=k,
            own_power=gamma1,
            interferer_power=gamma1,
            params=params,
            threshold=rates.rs_lin,
        )

    @classmethod
    def su_busy(
        cls, k: int, gamma2: float, params: SystemParams, rates: Optional[LinkRates] = None
    ) -> "ChannelScenario":
        rates = rates or link_rates(params)
        return cls(
            n_su_interferers=k,
            pu_active=True,
            own_power=gamma2,
            interferer_power=gamma2,
            params=params,
            threshold=rates.rs_lin,
        )

    @classmethod
    def pu(
        cls, k: int, gamma2: float, params: SystemParams, rates: Optional[LinkRates] = None
    ) -> "ChannelScenario":
        rates = rates or link_rates(params)
        return cls(
            receiver="pu",
            n_su_interferers=k,
            own_power=params.gamma_p,
            interferer_power=gamma2,
            params=params,
            threshold=rates.rp_lin,
        )


class McEstimate(NamedTuple):
    estimate: float
    std_err: float


def mc_success_prob(scenario: ChannelScenario, n_samples: int, seed: int) -> McEstimate:
    """
    Estimate the decoding probability of a scenario by direct sampling.

    Args:
        scenario (ChannelScenario): Receiver setup.
        n_samples (int): Number of independent slots to draw.
        seed (int): Master seed for the sample streams.

    Returns:
        McEstimate: Sample mean and its binomial standard error.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")

    params = scenario.params
    if scenario.receiver == "su":
        own_rate, su_rate = params.delta_ss, params.delta_ss
    else:
        own_rate, su_rate = params.delta_pp, params.delta_sp

    streams = StreamFactory(seed)
    own_rng = streams.stream(Purpose.CHANNEL_OWN)
    su_rngs = [
        streams.stream(Purpose.CHANNEL_SU_INTERFERER, i)
        for i in range(scenario.n_su_interferers)
    ]
    pu_rng = streams.stream(Purpose.CHANNEL_PU_INTERFERER)

    successes = 0
    for start in range(0, n_samples, CHUNK):
        size = min(CHUNK, n_samples - start)
        interference = np.full(size, params.noise_N0)
        for rng in su_rngs:
            interference += scenario.interferer_power * exponential(rng, su_rate, size)
        if scenario.pu_active:
            interference += params.gamma_p * exponential(pu_rng, params.delta_ps, size)
        signal = scenario.own_power * exponential(own_rng, own_rate, size)
        successes += int(np.count_nonzero(signal > scenario.threshold * interference))

    estimate = successes / n_samples
    return McEstimate(estimate, math.sqrt(estimate * (1.0 - estimate) / n_samples))
