"""
通信与功耗模型测试
"""

import numpy as np
import pytest

from src.errors import DomainError, InfeasibleError
from src.models import ChannelRealization, PowerConfig, RadioConfig, Strategy
from src.simulator.system import (
    admissible_group_counts,
    bandwidth_share,
    element_share,
    evaluate,
    overall_capacity,
    overall_power,
    protocol_throughput,
    required_tx_power,
    snr,
    validate_strategy,
)
from conftest import random_realization


def strategy_of(occupation, group_size):
    occupation = np.asarray(occupation)
    phases = [np.zeros(group_size) if u else None for u in occupation]
    return Strategy(occupation=occupation, phases=phases)


class TestShares:
    def test_admissible_group_counts(self):
        assert admissible_group_counts(512, 8) == [1, 2, 4, 8]
        assert admissible_group_counts(6, 8) == [1, 2, 3, 6]

    def test_mixed_allocation(self):
        shares = bandwidth_share(np.array([1, 0, 2, 0]), 0.6, 0.4)
        np.testing.assert_allclose(shares, [0.3, 0.2, 0.3, 0.2])

    def test_all_assisted_uses_full_band(self):
        np.testing.assert_allclose(bandwidth_share(np.array([1, 2, 3, 4]), 0.6, 0.4), 0.25)

    def test_all_direct_uses_full_band(self):
        np.testing.assert_allclose(bandwidth_share(np.zeros(4, dtype=int), 0.6, 0.4), 0.25)

    @pytest.mark.parametrize("occupation", [[0, 0, 0], [1, 0, 0], [0, 2, 1], [1, 2, 3]])
    def test_shares_sum_to_one(self, occupation):
        assert bandwidth_share(np.array(occupation), 0.7, 0.3).sum() == pytest.approx(1.0)

    def test_element_share(self):
        np.testing.assert_allclose(element_share(np.array([0, 1, 2, 0])), [0, 0.5, 0.5, 0])
        np.testing.assert_allclose(element_share(np.zeros(3, dtype=int)), 0.0)


class TestSnr:
    def test_direct_only(self):
        assert snr(1e-5, None, None, None, 0.01, 1e-12) == pytest.approx(1.0)

    def test_reflection_adds_coherently(self):
        g = np.full(4, 1e-3 + 0j)
        h = np.full(4, 1e-3 + 0j)
        value = snr(1e-6, g, h, np.zeros(4), 1.0, 1e-12)
        assert value == pytest.approx((1e-6 + 4e-6) ** 2 / 1e-12)

    def test_noise_must_be_positive(self):
        with pytest.raises(DomainError):
            snr(1e-5, None, None, None, 0.01, 0.0)

    def test_phase_length_mismatch(self):
        with pytest.raises(DomainError):
            snr(1e-5, np.ones(4), np.ones(4), np.zeros(3), 0.01, 1e-12)

    def test_required_tx_power_inverts_snr(self):
        rho2 = required_tx_power(1e-5, 100.0, 1e-12)
        assert snr(1e-5, None, None, None, rho2, 1e-12) == pytest.approx(100.0)


class TestValidateStrategy:
    @pytest.fixture
    def radio(self):
        return RadioConfig(num_pairs=3, num_elements=4, max_groups=3)

    def test_feasible(self, radio):
        validate_strategy(strategy_of([1, 0, 2], 2), radio)

    @pytest.mark.parametrize("occupation, group_size, constraint", [
        ([1, 1, 0], 2, "C2"),
        ([0, 3, 0], 4, "C1"),
        ([1, 2, 3], 1, "C4"),
        ([-1, 0, 0], 4, "C1"),
    ])
    def test_violations(self, radio, occupation, group_size, constraint):
        with pytest.raises(InfeasibleError) as info:
            validate_strategy(strategy_of(occupation, group_size), radio)
        assert info.value.constraint == constraint

    def test_group_limit(self):
        radio = RadioConfig(num_pairs=4, num_elements=4, max_groups=2)
        with pytest.raises(InfeasibleError) as info:
            validate_strategy(strategy_of([1, 2, 3, 4], 1), radio)
        assert info.value.constraint == "C5"

    def test_phase_on_direct_pair(self, radio):
        strategy = strategy_of([1, 0, 0], 4)
        strategy.phases[1] = np.zeros(4)
        with pytest.raises(InfeasibleError) as info:
            validate_strategy(strategy, radio)
        assert info.value.constraint == "C8"

    def test_wrong_phase_length(self, radio):
        with pytest.raises(InfeasibleError) as info:
            validate_strategy(strategy_of([1, 0, 2], 4), radio)
        assert info.value.constraint == "C8"

    def test_phase_range(self, radio):
        strategy = strategy_of([1, 0, 0], 4)
        strategy.phases[0] = np.array([0.0, 1.0, 2 * np.pi, 3.0])
        with pytest.raises(InfeasibleError) as info:
            validate_strategy(strategy, radio)
        assert info.value.constraint == "C9"

    def test_power_budget(self, radio):
        with pytest.raises(InfeasibleError) as info:
            validate_strategy(strategy_of([1, 0, 2], 2), radio, PowerConfig(max_total_w=0.1))
        assert info.value.constraint == "C6"


class TestPower:
    def test_explicit_sum(self):
        power = PowerConfig()
        occupation = np.array([1, 0])
        total = overall_power(occupation, element_share(occupation), power, 0.01, 2)
        expected = 2 * 1.25 * 0.01 + (0.5 + 0.1 + 0.512) + (0.5 + 0.05)
        assert total == pytest.approx(expected)

    def test_ris_power_counted_once(self):
        power = PowerConfig()
        one = np.array([1, 0, 0, 0])
        two = np.array([1, 2, 0, 0])
        base = 4 * 1.25 * 0.01 + 4 * 0.5
        # 全部 RIS 功耗在辅助用户对之间均分
        assert overall_power(one, element_share(one), power, 0.01, 4) == pytest.approx(
            base + 0.1 + 3 * 0.05 + 0.512
        )
        assert overall_power(two, element_share(two), power, 0.01, 4) == pytest.approx(
            base + 2 * 0.1 + 2 * 0.05 + 0.512
        )


class TestThroughput:
    def test_overhead_law(self, rng):
        for _ in range(10):
            t_frame = rng.uniform(1e-4, 1e-2)
            t_negotiation = rng.uniform(0.0, t_frame * 0.999)
            r_star = rng.uniform(1e5, 1e8)
            assert protocol_throughput(r_star, t_negotiation, t_frame) == pytest.approx(
                (1 - t_negotiation / t_frame) * r_star, rel=1e-12
            )

    def test_zero_overhead(self):
        assert protocol_throughput(5e6, 0.0, 1e-3) == 5e6

    @pytest.mark.parametrize("t_negotiation, t_frame", [(1e-3, 1e-3), (2e-3, 1e-3), (-1e-6, 1e-3), (0.0, 0.0)])
    def test_invalid_durations(self, t_negotiation, t_frame):
        with pytest.raises(DomainError):
            protocol_throughput(1e6, t_negotiation, t_frame)


class TestCapacity:
    def test_rates_split_by_decision(self, rng, radio_k2_n4):
        realization = random_realization(rng, 2, 4)
        metrics = overall_capacity(realization, strategy_of([1, 0], 4), radio_k2_n4)
        assert metrics.r_overall == pytest.approx(metrics.r_ris + metrics.r_dl)
        assert metrics.r_ris == pytest.approx(metrics.rate_per_pair[0])
        assert metrics.r_dl == pytest.approx(metrics.rate_per_pair[1])

    def test_infeasible_strategy_rejected(self, rng, radio_k2_n4):
        realization = random_realization(rng, 2, 4)
        with pytest.raises(InfeasibleError):
            overall_capacity(realization, strategy_of([1, 1], 2), radio_k2_n4)

    def test_evaluate_applies_overhead(self, rng, radio_k2_n4, power):
        realization = random_realization(rng, 2, 4)
        metrics = evaluate(realization, strategy_of([1, 2], 2), radio_k2_n4, power, 1e-4, 1e-3)
        assert metrics.s_overall == pytest.approx(0.9 * metrics.r_overall)
        assert metrics.p_overall > 0

    def test_noise_scaling_flag(self, rng):
        realization = random_realization(rng, 2, 4)
        plain = RadioConfig(num_pairs=2, num_elements=4, max_groups=2)
        scaled = RadioConfig(num_pairs=2, num_elements=4, max_groups=2, noise_scales_with_bandwidth=True)
        strategy = strategy_of([0, 0], 4)
        # 噪声按带宽份额缩小，SNR 只会变大
        assert overall_capacity(realization, strategy, scaled).r_overall > \
            overall_capacity(realization, strategy, plain).r_overall

    def test_invariant_under_pair_relabelling(self, rng):
        radio = RadioConfig(num_pairs=4, num_elements=8, max_groups=4)
        for _ in range(20):
            realization = random_realization(rng, 4, 8)
            occupation = rng.permutation([1, 2, 0, 0])
            phases = [rng.uniform(0, 2 * np.pi, 4) if u else None for u in occupation]
            order = rng.permutation(4)

            relabelled = ChannelRealization(
                direct=realization.direct[order],
                uav_to_ris=realization.uav_to_ris[order],
                ris_to_user=realization.ris_to_user[order],
            )
            permuted = Strategy(occupation=occupation[order], phases=[phases[i] for i in order])

            original = overall_capacity(realization, Strategy(occupation=occupation, phases=phases), radio)
            moved = overall_capacity(relabelled, permuted, radio)
            assert moved.r_overall == pytest.approx(original.r_overall, rel=1e-12)
            np.testing.assert_allclose(moved.rate_per_pair, original.rate_per_pair[order], rtol=1e-12)

    @pytest.mark.parametrize("pair", [0, 1, 2])
    def test_strictly_increasing_in_pair_snr(self, rng, pair):
        radio = RadioConfig(num_pairs=3, num_elements=4, max_groups=2)
        strategy = Strategy(
            occupation=np.array([1, 0, 2]),
            phases=[rng.uniform(0, 2 * np.pi, 2), None, rng.uniform(0, 2 * np.pi, 2)],
        )
        for _ in range(20):
            realization = random_realization(rng, 3, 4)
            base = overall_capacity(realization, strategy, radio)

            # 同时放大直达与 UAV→RIS 信道，该用户对 SNR 变为 2.25 倍，带宽份额不变
            direct = realization.direct.copy()
            uav_to_ris = realization.uav_to_ris.copy()
            direct[pair] *= 1.5
            uav_to_ris[pair] *= 1.5
            stronger = ChannelRealization(direct=direct, uav_to_ris=uav_to_ris, ris_to_user=realization.ris_to_user)

            boosted = overall_capacity(stronger, strategy, radio)
            assert boosted.snr_per_pair[pair] == pytest.approx(2.25 * base.snr_per_pair[pair])
            assert boosted.r_overall > base.r_overall
