"""
在线推理
分类头概率投影为可行的 F，回归头输出乘 2π 得到每组相位
"""

import time
from typing import Optional

import numpy as np

from src.errors import DomainError
from src.models import (
    ChannelRealization,
    Geometry,
    PowerConfig,
    RadioConfig,
    ScenarioConfig,
    SolveMethod,
    SolveReport,
    Strategy,
)
from src.mtl.features import extract_features
from src.mtl.network import MtlModel
from src.optimizer.allocation import build_strategy, occupation_from_decision, phase_rule, within_power_budget
from src.optimizer.phases import TWO_PI, wrap_phase
from src.simulator.system import admissible_group_counts, overall_capacity


def project_allocation(
    assist_probs: np.ndarray,
    num_elements: int,
    max_groups: int,
    threshold: float = 0.5
) -> np.ndarray:
    """把每对的接入概率投影为可行决策向量

    取概率 > threshold 的对数 c，L 为不超过 min(c, L_max) 的最大可取组数，
    选概率最高的 L 对（同概率取序号小者）

    Args:
        assist_probs: 接入 RIS 的概率 (K,)
        num_elements: N
        max_groups: L_max
        threshold: 判决门限

    Returns:
        F (K,)
    """
    assist_probs = np.asarray(assist_probs, dtype=float)
    num_pairs = assist_probs.size
    wanted = int(np.sum(assist_probs > threshold))
    levels = admissible_group_counts(num_elements, min(wanted, max_groups, num_pairs))
    group_count = max(levels) if levels else 0

    decision = np.zeros(num_pairs, dtype=int)
    if group_count:
        # 稳定排序保证同概率时序号小者优先
        ranked = np.argsort(-assist_probs, kind="stable")
        decision[ranked[:group_count]] = 1
    return decision


def _shrink_to_budget(
    decision: np.ndarray,
    assist_probs: np.ndarray,
    radio: RadioConfig,
    power: PowerConfig
) -> np.ndarray:
    """超出功耗上限时逐级减少组数"""
    levels = sorted(admissible_group_counts(radio.num_elements, min(radio.max_groups, radio.num_pairs)))
    ranked = np.argsort(-np.asarray(assist_probs, dtype=float), kind="stable")
    while decision.sum() > 0 and not within_power_budget(decision, radio, power):
        smaller = [l for l in levels if l < decision.sum()]
        decision = np.zeros_like(decision)
        if smaller:
            decision[ranked[:smaller[-1]]] = 1
    return decision


def infer(
    model: MtlModel,
    features: np.ndarray,
    radio: RadioConfig,
    power: Optional[PowerConfig] = None
) -> Strategy:
    """单样本推理

    Args:
        model: 已训练模型
        features: 特征向量
        radio: 无线参数（N、L_max）
        power: 提供时保证满足功耗上限

    Returns:
        可行策略，每个辅助用户对整组共用一个相位
    """
    if model.num_pairs != radio.num_pairs:
        raise DomainError(f"模型按 K={model.num_pairs} 训练，场景 K={radio.num_pairs}")
    assist_probs, reg = model.predict(features)
    assist_probs, reg = assist_probs[0], reg[0]

    decision = project_allocation(assist_probs, radio.num_elements, radio.max_groups)
    if power is not None:
        decision = _shrink_to_budget(decision, assist_probs, radio, power)

    occupation = occupation_from_decision(decision)
    group_count = int(decision.sum())
    phases: list[Optional[np.ndarray]] = [None] * decision.size
    for k in np.flatnonzero(decision):
        size = radio.num_elements // group_count
        phases[k] = wrap_phase(np.full(size, TWO_PI * reg[k]))
    return Strategy(occupation=occupation, phases=phases)


def solve_mtl(
    model: MtlModel,
    realization: ChannelRealization,
    geometry: Geometry,
    scenario: ScenarioConfig
) -> SolveReport:
    """用 MTL 模型代替求解器

    mtl.phase_source 为 closed_form 时只保留预测的分配，相位用已知信道按闭式重新计算
    """
    start = time.perf_counter()
    features = extract_features(realization, geometry, scenario.radio, scenario.placement_area)
    strategy = infer(model, features, scenario.radio, scenario.power)
    flags: list[str] = []

    if scenario.mtl.phase_source == "closed_form":
        strategy, flags = build_strategy(
            strategy.decision, realization, phase_rule(scenario.optimizer.phase_mode)
        )
    elapsed = time.perf_counter() - start

    objective = overall_capacity(realization, strategy, scenario.radio).r_overall
    return SolveReport(
        best=strategy,
        objective=objective,
        evaluated=1,
        iterations=1,
        elapsed=elapsed,
        method=SolveMethod.MTL,
        history=[objective],
        flags=flags,
    )
