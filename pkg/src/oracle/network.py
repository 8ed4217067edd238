"""
Slot-level simulator of one primary user and M_s saturated secondary users.

Per slot: the PU transmits iff its queue is non-empty, every SU senses the
PU state perfectly and transmits with (a1, gamma1) or (a2, gamma2), fresh
exponential gains are drawn for every link, and each receiver decodes iff its
SINR clears the threshold. A packet arriving in slot t is servable from slot
t + 1 (departures precede arrivals).

Random draws do not depend on the queue, so both PU-state outcomes are drawn
for every slot and the queue recursion selects one afterwards. The recursion
itself is a Lindley recursion and is solved with cumulative sums.
"""

from dataclasses import dataclass
from typing import Any, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import linregress

from src.logger.logger import Logger
from src.model.throughput import link_rates
from src.model.types import AccessPolicy, SystemParams
from src.oracle.streams import Purpose, StreamFactory, exponential, open_uniform

logger = Logger(__name__)

# (user, slot) cells per chunk; the slot count per chunk shrinks as M_s grows.
CHUNK_CELLS = 1 << 18
DEFAULT_WARMUP_FRACTION = 0.1
# Queue growth (packets/slot) above which a run counts as unstable.
INSTABILITY_SLOPE = 1e-3
TRACE_COLUMNS = ["slot", "Q_p", "pu_tx", "n_su_tx", "pu_ack", "su_acks"]


class SimConfig(BaseModel):
    """
    One simulation run. ``warmup_slots`` defaults to 10% of ``n_slots``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_slots: int = Field(gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    lambda_p: float = Field(ge=0.0, le=1.0)
    policy: AccessPolicy
    params: SystemParams = SystemParams()
    warmup_slots: Optional[int] = Field(None, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _default_warmup(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("warmup_slots") is None:
            n_slots = data.get("n_slots")
            if isinstance(n_slots, int):
                data = {**data, "warmup_slots": int(n_slots * DEFAULT_WARMUP_FRACTION)}
        return data

    @model_validator(mode="after")
    def _warmup_leaves_slots(self) -> "SimConfig":
        if self.warmup_slots is None or self.warmup_slots >= self.n_slots:
            raise ValueError("warmup_slots must be smaller than n_slots")
        return self


class SimResult(BaseModel):
    """Empirical counterparts of the analytic quantities over the counted slots."""

    model_config = ConfigDict(frozen=True)

    emp_mu_s: float
    per_su_mu_s: List[float]
    emp_mu_p: float
    emp_pr_empty: float
    mean_queue_len: float
    max_queue_len: int
    emp_energy_su: float
    emp_energy_pu: float
    slots_counted: int
    queue_slope: float


@dataclass
class _SlotRecord:
    queue: np.ndarray  # (n,) queue length at slot start
    busy: np.ndarray  # (n,) PU transmitted
    pu_ok: np.ndarray  # (n,) PU would be decoded if it transmitted
    su_tx: np.ndarray  # (M, n)
    su_ack: np.ndarray  # (M, n)


def _run_slots(config: SimConfig) -> _SlotRecord:
    params, policy = config.params, config.policy
    rates = link_rates(params)
    n, users = config.n_slots, params.num_su_Ms

    streams = StreamFactory(config.seed)
    arrival_rng = streams.stream(Purpose.ARRIVAL)
    access_rngs = [streams.stream(Purpose.ACCESS, j) for j in range(users)]
    own_rngs = [streams.stream(Purpose.GAIN_OWN, j) for j in range(users)]
    cross_rngs = {
        (theta, j): streams.stream(Purpose.GAIN_SU_TO_SU, theta, j)
        for theta in range(users)
        for j in range(users)
        if theta != j
    }
    pu_su_rngs = [streams.stream(Purpose.GAIN_PU_TO_SU, j) for j in range(users)]
    su_pu_rngs = [streams.stream(Purpose.GAIN_SU_TO_PU, j) for j in range(users)]
    pu_pu_rng = streams.stream(Purpose.GAIN_PU_TO_PU)

    arrivals = np.empty(n, dtype=bool)
    pu_ok = np.empty(n, dtype=bool)
    tx_idle = np.empty((users, n), dtype=bool)
    tx_busy = np.empty((users, n), dtype=bool)
    ack_idle = np.empty((users, n), dtype=bool)
    ack_busy = np.empty((users, n), dtype=bool)

    n0, rs, rp = params.noise_N0, rates.rs_lin, rates.rp_lin
    g1, g2, gp = policy.gamma1, policy.gamma2, params.gamma_p

    chunk = max(1, CHUNK_CELLS // users)
    for start in range(0, n, chunk):
        size = min(chunk, n - start)
        cols = slice(start, start + size)

        arrivals[cols] = open_uniform(arrival_rng, size) < config.lambda_p
        draw = np.stack([open_uniform(rng, size) for rng in access_rngs])
        idle_on = draw < policy.a1
        busy_on = draw < policy.a2

        own = np.stack([exponential(rng, params.delta_ss, size) for rng in own_rngs])
        su_interference_idle = np.zeros((users, size))
        su_interference_busy = np.zeros((users, size))
        for (theta, j), rng in cross_rngs.items():
            gain = exponential(rng, params.delta_ss, size)
            su_interference_idle[j] += g1 * idle_on[theta] * gain
            su_interference_busy[j] += g2 * busy_on[theta] * gain
        pu_to_su = np.stack([exponential(rng, params.delta_ps, size) for rng in pu_su_rngs])
        su_to_pu = np.stack([exponential(rng, params.delta_sp, size) for rng in su_pu_rngs])
        pu_to_pu = exponential(pu_pu_rng, params.delta_pp, size)

        tx_idle[:, cols] = idle_on
        tx_busy[:, cols] = busy_on
        ack_idle[:, cols] = idle_on & (g1 * own > rs * (n0 + su_interference_idle))
        ack_busy[:, cols] = busy_on & (
            g2 * own > rs * (n0 + gp * pu_to_su + su_interference_busy)
        )
        pu_ok[cols] = gp * pu_to_pu > rp * (n0 + g2 * (busy_on * su_to_pu).sum(axis=0))

    queue = _queue_lengths(arrivals, pu_ok)
    busy = queue > 0
    return _SlotRecord(
        queue=queue,
        busy=busy,
        pu_ok=pu_ok,
        su_tx=np.where(busy, tx_busy, tx_idle),
        su_ack=np.where(busy, ack_busy, ack_idle),
    )


def _queue_lengths(arrivals: np.ndarray, pu_ok: np.ndarray) -> np.ndarray:
    """
    Q[t+1] = max(Q[t] - S[t], 0) + X[t] with Q[0] = 0.

    With V[t] = max(Q[t] - S[t], 0) this is V[t+1] = max(V[t] + X[t] - S[t+1], 0),
    whose solution is the running sum minus its running minimum.
    """
    x = arrivals.astype(np.int64)
    s = pu_ok.astype(np.int64)
    running = np.concatenate(([0], np.cumsum(x[:-1] - s[1:])))
    after_departure = running - np.minimum.accumulate(running)
    queue = np.zeros_like(x)
    queue[1:] = after_departure[:-1] + x[:-1]
    return queue


def _queue_slope(queue: np.ndarray) -> float:
    tail = queue[len(queue) // 2 :]
    if len(tail) < 2:
        return 0.0
    return float(linregress(np.arange(len(tail), dtype=float), tail.astype(float)).slope)


def _summarize(config: SimConfig, record: _SlotRecord) -> SimResult:
    params, policy = config.params, config.policy
    counted = slice(config.warmup_slots, config.n_slots)
    busy = record.busy[counted]
    queue = record.queue[counted]
    su_tx = record.su_tx[:, counted]

    per_su = record.su_ack[:, counted].mean(axis=1)
    busy_slots = int(busy.sum())
    if busy_slots:
        emp_mu_p = float(record.pu_ok[counted][busy].mean())
    else:
        # PU never transmitted: report the rate it would have been served at.
        emp_mu_p = float(record.pu_ok[counted].mean())

    power = np.where(busy, policy.gamma2, policy.gamma1) * su_tx
    return SimResult(
        emp_mu_s=float(per_su.mean()),
        per_su_mu_s=[float(v) for v in per_su],
        emp_mu_p=emp_mu_p,
        emp_pr_empty=float(1.0 - busy.mean()),
        mean_queue_len=float(queue.mean()),
        max_queue_len=int(queue.max()),
        emp_energy_su=float(power.mean() * params.bandwidth_W * params.su_airtime),
        emp_energy_pu=float(busy.mean() * params.gamma_p * params.bandwidth_W * params.slot_T),
        slots_counted=int(queue.size),
        queue_slope=_queue_slope(record.queue),
    )


def _trace_frame(record: _SlotRecord) -> pd.DataFrame:
    """
    Per-slot trace of a run: queue length, PU activity and SU acknowledgements.

    ``su_acks`` is a bitmask with bit j set when user j was decoded.
    """
    weights = np.left_shift(np.int64(1), np.arange(record.su_ack.shape[0], dtype=np.int64))
    return pd.DataFrame(
        {
            "slot": np.arange(record.queue.size, dtype=np.int64),
            "Q_p": record.queue,
            "pu_tx": record.busy.astype(np.int64),
            "n_su_tx": record.su_tx.sum(axis=0).astype(np.int64),
            "pu_ack": (record.busy & record.pu_ok).astype(np.int64),
            "su_acks": (record.su_ack.astype(np.int64) * weights[:, None]).sum(axis=0),
        },
        columns=TRACE_COLUMNS,
    )


def simulate_network(config: SimConfig, trace_path: Optional[str] = None) -> SimResult:
    """
    Run the slot simulator.

    Args:
        config (SimConfig): Run description; identical configs give identical results.
        trace_path (Optional[str]): When set, the per-slot trace is written there as CSV.

    Returns:
        SimResult: Statistics over the slots after warmup.
    """
    record = _run_slots(config)
    result = _summarize(config, record)
    if trace_path:
        _trace_frame(record).to_csv(trace_path, index=False)
        logger.info("Wrote slot trace", path=trace_path, slots=config.n_slots)
    if result.queue_slope > INSTABILITY_SLOPE:
        logger.debug(
            "Primary queue is growing",
            slope=result.queue_slope,
            lambda_p=config.lambda_p,
        )
    return result


def stability_probe(
    policy: AccessPolicy,
    params: SystemParams,
    lambda_p: float,
    n_slots: int = 200_000,
    seed: int = 0,
    tolerance: float = INSTABILITY_SLOPE,
) -> bool:
    """
    Empirical stability check of the primary queue.

    Returns True when the least-squares slope of the queue length over the
    second half of the run does not exceed ``tolerance`` packets/slot.
    """
    config = SimConfig(
        n_slots=n_slots, seed=seed, lambda_p=lambda_p, policy=policy, params=params
    )
    return _queue_slope(_run_slots(config).queue) <= tolerance
