"""
交替优化求解器
(i) 固定相位规则，在 F 上做翻转/交换/补齐的爬山搜索；(ii) 固定 U，用闭式相位更新 Ψ
"""

import itertools
import time
from typing import Optional

import numpy as np
from loguru import logger

from src.errors import DomainError, InfeasibleError
from src.models import (
    ChannelRealization,
    OptimizerConfig,
    PowerConfig,
    RadioConfig,
    SolveMethod,
    SolveReport,
)
from src.optimizer.allocation import (
    admissible_levels,
    build_strategy,
    evaluate_decision,
    phase_rule,
    selection_key,
    within_power_budget,
)
from src.simulator.system import overall_capacity


def _neighbors(decision: np.ndarray, levels: set[int]) -> list[np.ndarray]:
    """F 的邻域：单比特翻转、交换，以及到相邻可取 L 的最小补齐/删减"""
    num_pairs = decision.size
    current = int(decision.sum())
    on = np.flatnonzero(decision)
    off = np.flatnonzero(decision == 0)
    moves: dict[tuple, np.ndarray] = {}

    def _add(candidate: np.ndarray) -> None:
        if int(candidate.sum()) in levels:
            moves.setdefault(tuple(candidate.tolist()), candidate)

    for k in range(num_pairs):
        flipped = decision.copy()
        flipped[k] ^= 1
        _add(flipped)

    for i, j in itertools.product(on, off):
        swapped = decision.copy()
        swapped[i], swapped[j] = 0, 1
        _add(swapped)

    above = [l for l in levels if l > current + 1]
    if above:
        target = min(above)
        for extra in itertools.combinations(off, target - current):
            grown = decision.copy()
            grown[list(extra)] = 1
            _add(grown)

    below = [l for l in levels if l < current - 1]
    if below:
        target = max(below)
        for removed in itertools.combinations(on, current - target):
            shrunk = decision.copy()
            shrunk[list(removed)] = 0
            _add(shrunk)

    return list(moves.values())


def solve_alternating(
    realization: ChannelRealization,
    radio: RadioConfig,
    power: PowerConfig,
    config: Optional[OptimizerConfig] = None,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
    initial: Optional[np.ndarray] = None
) -> SolveReport:
    """交替优化 RIS 单元分配与相位配置

    Args:
        realization: 信道实现
        radio: 无线参数
        power: 功耗参数
        config: 求解器参数
        max_iter: 最大迭代次数，默认取 config.max_iter
        tol: 相对提升阈值，默认取 config.tol
        initial: 初始决策向量；None 时从全辅助/全直射两个闭式情形中取较优者

    Returns:
        SolveReport，history 为每次迭代后的目标值（单调不减）
    """
    config = config or OptimizerConfig()
    max_iter = config.max_iter if max_iter is None else max_iter
    tol = config.tol if tol is None else tol
    if max_iter < 1:
        raise DomainError(f"max_iter 必须 ≥ 1: {max_iter}")

    start = time.perf_counter()
    rule = phase_rule(config.phase_mode)
    levels = admissible_levels(radio)
    evaluated = 0

    def _feasible(decision: np.ndarray) -> bool:
        return int(decision.sum()) in levels and within_power_budget(decision, radio, power)

    if initial is not None:
        anchors = [np.asarray(initial, dtype=int)]
    else:
        anchors = [np.zeros(radio.num_pairs, dtype=int), np.ones(radio.num_pairs, dtype=int)]
    anchors = [a for a in anchors if _feasible(a)]
    if not anchors:
        raise InfeasibleError("初始分配不可行", "C6")

    scored = []
    for anchor in anchors:
        objective, _, _ = evaluate_decision(anchor, realization, radio, rule)
        evaluated += 1
        scored.append((selection_key(objective, anchor), objective, anchor))
    _, objective, decision = min(scored, key=lambda item: item[0])

    history = [objective]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # (i) 分配步：固定相位规则，取最优邻居
        best_objective, best_decision = objective, decision
        for candidate in _neighbors(decision, levels):
            if not within_power_budget(candidate, radio, power):
                continue
            value, _, _ = evaluate_decision(candidate, realization, radio, rule)
            evaluated += 1
            if selection_key(value, candidate) < selection_key(best_objective, best_decision):
                best_objective, best_decision = value, candidate

        improved = best_objective - objective > tol * max(1.0, abs(objective))
        if improved:
            decision = best_decision

        # (ii) 相位步：固定 U，闭式更新 Ψ
        strategy, flags = build_strategy(decision, realization, rule)
        objective = overall_capacity(realization, strategy, radio).r_overall
        history.append(objective)

        if not improved:
            break

    elapsed = time.perf_counter() - start
    logger.debug(
        f"交替优化完成: {iterations} 次迭代, 评估 {evaluated} 次, "
        f"F={decision.tolist()}, R={objective / 1e6:.4f} Mbps"
    )

    return SolveReport(
        best=strategy,
        objective=objective,
        evaluated=evaluated,
        iterations=iterations,
        elapsed=elapsed,
        method=SolveMethod.ALTERNATING,
        history=history,
        flags=flags,
    )
