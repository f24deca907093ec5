"""
RIS 单元分配
枚举决策向量 F、按升序把组号分给被选中的用户对，并在给定相位规则下构造完整策略
"""

import itertools
from typing import Callable, Optional

import numpy as np

from src.errors import DomainError
from src.models import AllocationCandidate, ChannelRealization, PowerConfig, RadioConfig, Strategy
from src.optimizer.phases import optimal_phases
from src.simulator.channel import group_channel
from src.simulator.system import (
    admissible_group_counts,
    element_share,
    overall_capacity,
    overall_power,
)


PhaseRule = Callable[[complex, np.ndarray, np.ndarray], np.ndarray]


def enumerate_allocations(num_pairs: int, max_groups: int) -> list[AllocationCandidate]:
    """枚举所有 ΣF ≤ L_max 的二值决策向量（含全零），按字典序

    Args:
        num_pairs: K
        max_groups: L_max

    Returns:
        候选列表
    """
    if num_pairs < 1:
        raise DomainError(f"用户对数必须 ≥ 1: {num_pairs}")

    candidates = []
    for bits in itertools.product((0, 1), repeat=num_pairs):
        group_count = sum(bits)
        if group_count <= max_groups:
            candidates.append(AllocationCandidate(
                decision=np.array(bits, dtype=int),
                group_count=group_count
            ))
    return candidates


def admissible_levels(radio: RadioConfig) -> set[int]:
    """可取的 L（含 0）"""
    limit = min(radio.max_groups, radio.num_pairs)
    return {0, *admissible_group_counts(radio.num_elements, limit)}


def occupation_from_decision(decision: np.ndarray) -> np.ndarray:
    """F → U：第 l 个被选中的用户对（按序号升序）占用第 l 组"""
    decision = np.asarray(decision, dtype=int)
    occupation = np.zeros(decision.shape, dtype=int)
    flagged = np.flatnonzero(decision)
    occupation[flagged] = np.arange(1, flagged.size + 1)
    return occupation


def phase_rule(phase_mode: str) -> PhaseRule:
    """按配置返回闭式相位规则"""
    if phase_mode not in ("per_element", "per_group"):
        raise DomainError(f"未知相位模式: {phase_mode}")
    per_element = phase_mode == "per_element"
    return lambda direct, g, h: optimal_phases(direct, g, h, per_element=per_element)


def build_strategy(
    decision: np.ndarray,
    realization: ChannelRealization,
    rule: PhaseRule
) -> tuple[Strategy, list[str]]:
    """按决策向量和相位规则构造策略

    Args:
        decision: F
        realization: 信道实现
        rule: 相位规则 (ℏ, g, h) → θ

    Returns:
        (策略, 标记列表)；直射增益为 0 的用户对会被标记
    """
    occupation = occupation_from_decision(decision)
    group_count = int(np.count_nonzero(occupation))
    phases: list[Optional[np.ndarray]] = [None] * occupation.size
    flags = []

    for k in np.flatnonzero(occupation):
        direct, g, h = group_channel(realization, int(k), int(occupation[k]), group_count)
        if direct == 0:
            flags.append(f"pair {k}: 直射增益为 0，反射项仅彼此对齐")
        phases[k] = rule(direct, g, h)

    return Strategy(occupation=occupation, phases=phases), flags


def within_power_budget(decision: np.ndarray, radio: RadioConfig, power: PowerConfig) -> bool:
    """C6：P_o ≤ P_max"""
    occupation = occupation_from_decision(decision)
    total = overall_power(occupation, element_share(occupation), power, radio.tx_power_w, radio.num_pairs)
    return total <= power.max_total_w


def evaluate_decision(
    decision: np.ndarray,
    realization: ChannelRealization,
    radio: RadioConfig,
    rule: PhaseRule
) -> tuple[float, Strategy, list[str]]:
    """在给定相位规则下评估一个决策向量的总容量"""
    strategy, flags = build_strategy(decision, realization, rule)
    metrics = overall_capacity(realization, strategy, radio)
    return metrics.r_overall, strategy, flags


def selection_key(objective: float, decision: np.ndarray) -> tuple:
    """总序：目标值大者优先，其次 L 小，再次 F 字典序小"""
    return (-objective, int(np.sum(decision)), tuple(int(b) for b in decision))
