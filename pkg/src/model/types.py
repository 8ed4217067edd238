"""
Domain types for the primary/secondary random-access model.

All quantities follow the units named on each field. Powers are spectral
densities (Watts/Hz); the bandwidth turns them into Watts where energies are
computed.
"""

from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SystemParams(BaseModel):
    """
    Physical and protocol constants of the network.

    Defaults are the reference operating point: T = 1 ms, tau = 0.1 T,
    b = 10 kbit, W = 10 MHz, N0 = 1e-11 W/Hz, delta = (2, 1, 2, 3),
    gamma_p = 1e-10 W/Hz and three secondary users.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    slot_T: float = Field(1e-3, gt=0, description="slot length, seconds")
    sense_tau: float = Field(1e-4, gt=0, description="sensing time, seconds")
    packet_bits: float = Field(10000.0, ge=0, description="packet length, bits")
    bandwidth_W: float = Field(1e7, gt=0, description="bandwidth, Hz")
    noise_N0: float = Field(1e-11, ge=0, description="noise density, Watts/Hz")
    delta_ss: float = Field(2.0, gt=0)
    delta_pp: float = Field(1.0, gt=0)
    delta_ps: float = Field(2.0, gt=0)
    delta_sp: float = Field(3.0, gt=0)
    gamma_p: float = Field(1e-10, gt=0, description="PU transmit power density, Watts/Hz")
    num_su_Ms: int = Field(3, ge=1, description="number of secondary users")

    @model_validator(mode="after")
    def _sensing_fits_in_slot(self) -> "SystemParams":
        if not self.sense_tau < self.slot_T:
            raise ValueError("sense_tau must be smaller than slot_T")
        return self

    @property
    def su_airtime(self) -> float:
        """Seconds a secondary transmission occupies: T - tau."""
        return self.slot_T - self.sense_tau


class AccessPolicy(BaseModel):
    """
    Symmetric access rule: access probability and power per sensed PU state.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    a1: float = Field(ge=0.0, le=1.0, description="access probability, PU idle")
    a2: float = Field(ge=0.0, le=1.0, description="access probability, PU busy")
    gamma1: float = Field(ge=0.0, description="power density when PU idle, Watts/Hz")
    gamma2: float = Field(ge=0.0, description="power density when PU busy, Watts/Hz")

    @model_validator(mode="after")
    def _ordered_access(self) -> "AccessPolicy":
        if self.a2 > self.a1:
            raise ValueError("a2 must not exceed a1")
        return self

    @classmethod
    def silent(cls) -> "AccessPolicy":
        return cls(a1=0.0, a2=0.0, gamma1=0.0, gamma2=0.0)

    def key(self) -> Tuple[float, float, float, float]:
        """Tie-break ordering used when two policies reach the same objective."""
        return (self.gamma1, self.gamma2, self.a1, self.a2)


class LinkRates(BaseModel):
    """Spectral rates (bits/s/Hz) and the matching linear SINR thresholds."""

    model_config = ConfigDict(frozen=True)

    rs_spectral: float
    rp_spectral: float
    rs_lin: float
    rp_lin: float


class Constraints(BaseModel):
    """
    Constraint set of the throughput maximization.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda_p: float = Field(0.3, ge=0.0, le=1.0, description="PU arrival rate, packets/slot")
    e_th_su: float = Field(5e-5, ge=0.0, description="SU average energy cap, Joules")
    e_th_pu: float = Field(1e-3, ge=0.0, description="PU average energy cap, Joules")
    gamma_max: float = Field(1e-8, gt=0.0, description="power box upper bound, Watts/Hz")


class ThroughputReport(BaseModel):
    """
    Analytic evaluation of one policy.

    ``slacks`` lists (constraint name, signed slack); a negative slack is a
    violated constraint.
    """

    model_config = ConfigDict(frozen=True)

    lambda_p: float
    mu_s: float
    mu_p: float
    pr_empty: float
    energy_su: float
    energy_pu: float
    stable: bool
    feasible: bool
    degenerate: bool = False
    slacks: List[Tuple[str, float]]

    def slack(self, name: str) -> float:
        return dict(self.slacks)[name]
