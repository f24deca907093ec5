"""
穷举求解器
遍历所有可行决策向量 F，每个候选用闭式相位评估，取总容量最大者
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from loguru import logger

from src.errors import InfeasibleError
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
    enumerate_allocations,
    evaluate_decision,
    phase_rule,
    selection_key,
    within_power_budget,
)


def solve_exhaustive(
    realization: ChannelRealization,
    radio: RadioConfig,
    power: PowerConfig,
    config: Optional[OptimizerConfig] = None
) -> SolveReport:
    """穷举求解 RIS 单元分配 + 相位配置

    Args:
        realization: 信道实现
        radio: 无线参数
        power: 功耗参数（C6 过滤）
        config: 求解器参数

    Returns:
        SolveReport

    Raises:
        InfeasibleError: 没有满足 C6 的候选
    """
    config = config or OptimizerConfig()
    start = time.perf_counter()
    rule = phase_rule(config.phase_mode)
    levels = admissible_levels(radio)

    candidates = [
        c.decision for c in enumerate_allocations(radio.num_pairs, radio.max_groups)
        if c.group_count in levels and within_power_budget(c.decision, radio, power)
    ]
    if not candidates:
        raise InfeasibleError("没有满足功耗约束的分配方案", "C6")

    def _evaluate(decision):
        return evaluate_decision(decision, realization, radio, rule)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_evaluate, candidates))
    else:
        results = [_evaluate(d) for d in candidates]

    best_index = min(
        range(len(candidates)),
        key=lambda i: selection_key(results[i][0], candidates[i])
    )
    objective, strategy, flags = results[best_index]
    elapsed = time.perf_counter() - start

    logger.debug(
        f"穷举完成: 评估 {len(candidates)} 个候选, "
        f"F*={candidates[best_index].tolist()}, R*={objective / 1e6:.4f} Mbps"
    )

    return SolveReport(
        best=strategy,
        objective=objective,
        evaluated=len(candidates),
        iterations=1,
        elapsed=elapsed,
        method=SolveMethod.EXHAUSTIVE,
        history=[objective],
        flags=flags,
    )
