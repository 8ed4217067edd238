import tracemalloc

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.model.throughput import (
    evaluate,
    p_succ_pu,
    p_succ_su_busy,
    p_succ_su_idle,
)
from src.model.types import AccessPolicy, Constraints, SystemParams
from src.oracle.channel import ChannelScenario, mc_success_prob
from src.oracle.network import (
    TRACE_COLUMNS,
    SimConfig,
    _queue_lengths,
    simulate_network,
    stability_probe,
)
from src.oracle.streams import Purpose, StreamFactory, exponential, open_uniform


class TestStreams:
    def test_same_seed_same_stream(self):
        first = StreamFactory(7).stream(Purpose.GAIN_OWN, 2).random(5)
        second = StreamFactory(7).stream(Purpose.GAIN_OWN, 2).random(5)
        np.testing.assert_array_equal(first, second)

    def test_streams_differ_by_link(self):
        factory = StreamFactory(7)
        a = factory.stream(Purpose.GAIN_OWN, 0).random(5)
        b = factory.stream(Purpose.GAIN_OWN, 1).random(5)
        assert not np.array_equal(a, b)

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_must_fit_in_64_bits(self, seed):
        with pytest.raises(ValueError):
            StreamFactory(seed)

    def test_full_width_seed_accepted(self):
        StreamFactory(2**64 - 1).stream(Purpose.ARRIVAL).random()

    def test_open_uniform_excludes_endpoints(self):
        draws = open_uniform(StreamFactory(0).stream(Purpose.ARRIVAL), 100_000)
        assert draws.min() > 0.0
        assert draws.max() < 1.0

    def test_exponential_mean(self):
        draws = exponential(StreamFactory(0).stream(Purpose.GAIN_OWN), 2.0, 200_000)
        assert draws.min() > 0.0
        assert draws.mean() == pytest.approx(0.5, rel=0.01)


class TestChannelOracle:
    @pytest.mark.parametrize("k", [0, 2])
    def test_su_idle_agrees_with_closed_form(self, params, rates, k):
        scenario = ChannelScenario.su_idle(k, 2e-10, params, rates)
        mc = mc_success_prob(scenario, 200_000, seed=11)
        closed = p_succ_su_idle(k, 2e-10, params, rates)
        assert abs(mc.estimate - closed) <= 4 * mc.std_err

    @pytest.mark.parametrize("k", [0, 1])
    def test_su_busy_agrees_with_closed_form(self, params, rates, k):
        policy = AccessPolicy(a1=1.0, a2=1.0, gamma1=1e-10, gamma2=1e-10)
        mc = mc_success_prob(ChannelScenario.su_busy(k, 1e-10, params, rates), 200_000, seed=12)
        assert abs(mc.estimate - p_succ_su_busy(k, policy, params, rates)) <= 4 * mc.std_err

    @pytest.mark.parametrize("k", [0, 4])
    def test_pu_agrees_with_closed_form(self, params, rates, k):
        policy = AccessPolicy(a1=1.0, a2=1.0, gamma1=1e-10, gamma2=1e-10)
        mc = mc_success_prob(ChannelScenario.pu(k, 1e-10, params, rates), 200_000, seed=13)
        assert abs(mc.estimate - p_succ_pu(k, policy, params, rates)) <= 4 * mc.std_err

    def test_noise_free_solo_link_is_exact(self):
        quiet = SystemParams(noise_N0=0.0)
        mc = mc_success_prob(ChannelScenario.su_idle(0, 1e-10, quiet), 10_000, seed=0)
        assert mc.estimate == 1.0
        assert mc.std_err == 0.0

    def test_repeatable(self, params):
        scenario = ChannelScenario.su_busy(2, 1e-10, params)
        assert mc_success_prob(scenario, 5_000, 3) == mc_success_prob(scenario, 5_000, 3)

    def test_pu_receiver_cannot_hear_itself(self, params):
        with pytest.raises(ValidationError):
            ChannelScenario(
                receiver="pu",
                n_su_interferers=0,
                pu_active=True,
                own_power=1e-10,
                interferer_power=1e-10,
                params=params,
                threshold=1.0,
            )

    def test_std_err_halves_at_four_times_the_samples(self, params, rates):
        scenario = ChannelScenario.su_busy(1, 1e-10, params, rates)
        small = mc_success_prob(scenario, 20_000, seed=8)
        large = mc_success_prob(scenario, 80_000, seed=8)
        assert small.std_err / large.std_err == pytest.approx(2.0, rel=0.2)

    def test_rejects_empty_sample(self, params):
        with pytest.raises(ValueError):
            mc_success_prob(ChannelScenario.su_idle(0, 1e-10, params), 0, 0)


class TestQueueRecursion:
    def test_late_arrivals_wait_one_slot(self):
        arrivals = np.array([1, 1, 0, 0, 0], dtype=bool)
        served = np.ones(5, dtype=bool)
        np.testing.assert_array_equal(_queue_lengths(arrivals, served), [0, 1, 1, 0, 0])

    def test_backlog_builds_without_service(self):
        arrivals = np.array([1, 1, 1, 0, 0], dtype=bool)
        served = np.array([0, 0, 0, 1, 1], dtype=bool)
        np.testing.assert_array_equal(_queue_lengths(arrivals, served), [0, 1, 2, 3, 2])

    def test_matches_slot_by_slot_update(self):
        rng = np.random.default_rng(5)
        arrivals = rng.random(2_000) < 0.4
        served = rng.random(2_000) < 0.5
        expected = np.zeros(2_000, dtype=np.int64)
        for t in range(1, 2_000):
            after = max(expected[t - 1] - int(served[t - 1]), 0)
            expected[t] = after + int(arrivals[t - 1])
        np.testing.assert_array_equal(_queue_lengths(arrivals, served), expected)


class TestSimConfig:
    def test_default_warmup_is_a_tenth(self, policy):
        config = SimConfig(n_slots=1_000, lambda_p=0.3, policy=policy)
        assert config.warmup_slots == 100

    def test_warmup_must_leave_slots(self, policy):
        with pytest.raises(ValidationError):
            SimConfig(n_slots=100, lambda_p=0.3, policy=policy, warmup_slots=100)


class TestNetworkSimulator:
    @pytest.fixture(scope="class")
    def run(self):
        policy = AccessPolicy(a1=0.8, a2=0.3, gamma1=2e-10, gamma2=1e-10)
        config = SimConfig(n_slots=300_000, seed=21, lambda_p=0.3, policy=policy)
        return config, simulate_network(config)

    def test_matches_analytic_rates(self, run):
        config, result = run
        report = evaluate(config.policy, config.params, config.lambda_p, _loose())
        assert result.emp_mu_s == pytest.approx(report.mu_s, rel=0.03)
        assert result.emp_mu_p == pytest.approx(report.mu_p, rel=0.02)
        assert result.emp_pr_empty == pytest.approx(report.pr_empty, rel=0.03)

    def test_matches_analytic_energy(self, run):
        config, result = run
        report = evaluate(config.policy, config.params, config.lambda_p, _loose())
        assert result.emp_energy_su == pytest.approx(report.energy_su, rel=0.03)
        assert result.emp_energy_pu == pytest.approx(report.energy_pu, rel=0.03)

    def test_users_are_symmetric(self, run):
        _, result = run
        assert len(result.per_su_mu_s) == 3
        for value in result.per_su_mu_s:
            assert value == pytest.approx(result.emp_mu_s, rel=0.05)

    def test_counts_slots_after_warmup(self, run):
        config, result = run
        assert result.slots_counted == config.n_slots - config.warmup_slots
        assert result.max_queue_len >= result.mean_queue_len >= 0.0

    def test_deterministic(self, policy):
        config = SimConfig(n_slots=20_000, seed=4, lambda_p=0.3, policy=policy)
        assert simulate_network(config) == simulate_network(config)

    def test_silent_users_never_succeed(self):
        config = SimConfig(n_slots=10_000, lambda_p=0.3, policy=AccessPolicy.silent())
        result = simulate_network(config)
        assert result.emp_mu_s == 0.0
        assert result.emp_energy_su == 0.0

    def test_trace_columns_and_file(self, policy, tmp_path):
        config = SimConfig(n_slots=5_000, seed=2, lambda_p=0.3, policy=policy)
        path = tmp_path / "trace.csv"
        simulate_network(config, str(path))
        written = pd.read_csv(path)
        assert list(written.columns) == TRACE_COLUMNS
        assert len(written) == 5_000
        assert (written["slot"].to_numpy() == np.arange(5_000)).all()
        assert ((written["pu_tx"] == 1) == (written["Q_p"] > 0)).all()
        assert (written["pu_ack"] <= written["pu_tx"]).all()
        assert (written["su_acks"] < 2**3).all()

    @pytest.mark.slow
    def test_users_are_symmetric_over_a_long_run(self):
        policy = AccessPolicy(a1=0.5, a2=0.2, gamma1=1e-9, gamma2=5e-10)
        config = SimConfig(n_slots=1_000_000, seed=31, lambda_p=0.1, policy=policy)
        result = simulate_network(config)
        spread = max(result.per_su_mu_s) - min(result.per_su_mu_s)
        assert spread < 0.01 * result.emp_mu_s

    def test_many_users_stay_within_memory(self):
        crowd = SystemParams(num_su_Ms=40)
        policy = AccessPolicy(a1=0.05, a2=0.02, gamma1=2e-10, gamma2=1e-10)
        config = SimConfig(n_slots=50_000, seed=6, lambda_p=0.2, policy=policy, params=crowd)
        tracemalloc.start()
        try:
            result = simulate_network(config)
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
        assert peak < 150 * 2**20
        assert len(result.per_su_mu_s) == 40
        report = evaluate(policy, crowd, 0.2, _loose())
        assert result.emp_mu_s == pytest.approx(report.mu_s, rel=0.05)
        assert result.emp_mu_p == pytest.approx(report.mu_p, rel=0.03)


class TestStabilityProbe:
    def test_flips_near_analytic_frontier(self, params, rates, policy):
        frontier = evaluate(policy, params, 0.0, _loose(), rates).mu_p
        for offset in (-0.05, -0.03, -0.02):
            assert stability_probe(policy, params, frontier + offset)
        for offset in (0.02, 0.03, 0.05):
            assert not stability_probe(policy, params, frontier + offset)


def _loose() -> Constraints:
    return Constraints(e_th_su=1.0, e_th_pu=1.0)
