"""
对比方案
不使用 RIS 的纯直射方案，以及随机相位 RIS 方案
"""

import time
from typing import Optional

import numpy as np
from loguru import logger

from src.errors import InfeasibleError
from src.models import (
    ChannelRealization,
    OptimizerConfig,
    PowerConfig,
    RadioConfig,
    SolveMethod,
    SolveReport,
    Strategy,
)
from src.optimizer.allocation import (
    admissible_levels,
    enumerate_allocations,
    occupation_from_decision,
    selection_key,
    within_power_budget,
)
from src.simulator.channel import Link, link_rng
from src.simulator.system import overall_capacity


def solve_no_ris(
    realization: ChannelRealization,
    radio: RadioConfig,
    power: PowerConfig,
    config: Optional[OptimizerConfig] = None
) -> SolveReport:
    """纯直射方案：F 全零

    Raises:
        InfeasibleError: 全零分配也超出功耗上限
    """
    start = time.perf_counter()
    decision = np.zeros(radio.num_pairs, dtype=int)
    if not within_power_budget(decision, radio, power):
        raise InfeasibleError("纯直射方案超出功耗上限", "C6")

    strategy = Strategy(occupation=decision.copy(), phases=[None] * radio.num_pairs)
    objective = overall_capacity(realization, strategy, radio).r_overall
    return SolveReport(
        best=strategy,
        objective=objective,
        evaluated=1,
        iterations=1,
        elapsed=time.perf_counter() - start,
        method=SolveMethod.NO_RIS,
        history=[objective],
    )


def random_phase_table(seed: int, frame_index: int, num_pairs: int, num_elements: int) -> np.ndarray:
    """每个用户对在整个阵列上的随机相位 (K, N)，分组时取对应切片"""
    table = np.empty((num_pairs, num_elements))
    for k in range(num_pairs):
        rng = link_rng(seed, frame_index, k, Link.PHASES)
        table[k] = rng.uniform(0.0, 2.0 * np.pi, num_elements)
    return table


def solve_random_phase(
    realization: ChannelRealization,
    radio: RadioConfig,
    power: PowerConfig,
    config: Optional[OptimizerConfig] = None,
    seed: int = 0
) -> SolveReport:
    """随机相位 RIS 方案：相位随机，分配仍取最优

    每个候选 F 的相位从同一张随机相位表切片得到，因此结果不超过闭式相位下的最优值

    Args:
        realization: 信道实现
        radio: 无线参数
        power: 功耗参数
        config: 求解器参数（未使用，保持接口一致）
        seed: 随机相位种子

    Returns:
        SolveReport
    """
    start = time.perf_counter()
    table = random_phase_table(seed, realization.frame_index, radio.num_pairs, radio.num_elements)
    levels = admissible_levels(radio)

    best = None
    evaluated = 0
    for candidate in enumerate_allocations(radio.num_pairs, radio.max_groups):
        if candidate.group_count not in levels:
            continue
        if not within_power_budget(candidate.decision, radio, power):
            continue
        occupation = occupation_from_decision(candidate.decision)
        phases: list[Optional[np.ndarray]] = [None] * radio.num_pairs
        size = radio.num_elements // candidate.group_count if candidate.group_count else 0
        for k in np.flatnonzero(occupation):
            offset = (int(occupation[k]) - 1) * size
            phases[k] = table[k, offset:offset + size].copy()
        strategy = Strategy(occupation=occupation, phases=phases)

        objective = overall_capacity(realization, strategy, radio).r_overall
        evaluated += 1
        if best is None or selection_key(objective, candidate.decision) < selection_key(best[0], best[2]):
            best = (objective, strategy, candidate.decision)

    if best is None:
        raise InfeasibleError("没有满足功耗约束的分配方案", "C6")

    objective, strategy, decision = best
    logger.debug(f"随机相位方案: F={decision.tolist()}, R={objective / 1e6:.4f} Mbps")
    return SolveReport(
        best=strategy,
        objective=objective,
        evaluated=evaluated,
        iterations=1,
        elapsed=time.perf_counter() - start,
        method=SolveMethod.RANDOM_PHASE,
        history=[objective],
    )
