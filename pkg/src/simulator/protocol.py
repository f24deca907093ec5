"""
帧协议仿真
每帧依次执行：移动 → 重新生成信道（信道估计）→ 求解传输策略 → 扣除协商开销后计算吞吐量
"""

import dataclasses
from typing import Any, Callable, Optional

import numpy as np
from loguru import logger

from src.errors import DomainError, InfeasibleError
from src.models import (
    ChannelRealization,
    EpisodeResult,
    FrameTrace,
    Geometry,
    MobilityConfig,
    ScenarioConfig,
    SolveMethod,
    SolveReport,
)
from src.optimizer.alternating import solve_alternating
from src.optimizer.baselines import solve_no_ris, solve_random_phase
from src.optimizer.exhaustive import solve_exhaustive
from src.simulator.channel import sample_realization
from src.simulator.system import admissible_group_counts, evaluate


Solver = Callable[[ChannelRealization, Geometry], SolveReport]

SOLVER_NAMES = [m.value for m in (
    SolveMethod.EXHAUSTIVE,
    SolveMethod.ALTERNATING,
    SolveMethod.MTL,
    SolveMethod.NO_RIS,
    SolveMethod.RANDOM_PHASE,
)]


def step_mobility(geometry: Geometry, mobility: MobilityConfig, dt: float) -> Geometry:
    """沿 x 轴推进 UAV 与用户位置

    Args:
        geometry: 当前几何
        mobility: 速度
        dt: 时间步长（秒）

    Returns:
        新的 Geometry，y/z 坐标不变
    """
    if dt < 0:
        raise DomainError(f"时间步长必须非负: {dt}")
    if not (np.isfinite(mobility.uav_velocity) and np.isfinite(mobility.user_velocity)):
        raise DomainError("速度必须为有限值")

    uavs = np.array(geometry.uav_positions, dtype=float, copy=True)
    users = np.array(geometry.user_positions, dtype=float, copy=True)
    uavs[:, 0] += mobility.uav_velocity * dt
    users[:, 0] += mobility.user_velocity * dt
    return dataclasses.replace(geometry, uav_positions=uavs, user_positions=users)


def group_partition_of(
    decision: np.ndarray,
    num_elements: int,
    max_groups: Optional[int] = None
) -> dict[int, tuple[int, tuple[int, int]]]:
    """决策向量 → 组分配表

    Args:
        decision: F
        num_elements: N
        max_groups: L_max，None 时不限制

    Returns:
        {l: (用户对序号, (起始单元, 结束单元))}，l 从 1 开始，单元区间左闭右开

    Raises:
        DomainError: L 不可取（不整除 N 或超过 L_max）
    """
    decision = np.asarray(decision, dtype=int)
    if np.any((decision != 0) & (decision != 1)):
        raise DomainError(f"决策向量必须为二值: {decision.tolist()}")

    pairs = np.flatnonzero(decision)
    group_count = int(pairs.size)
    if group_count == 0:
        return {}

    limit = group_count if max_groups is None else max_groups
    if group_count not in admissible_group_counts(num_elements, limit):
        raise DomainError(f"组数 {group_count} 不可取（N={num_elements}, L_max={max_groups}）")

    size = num_elements // group_count
    return {
        l: (int(pair), ((l - 1) * size, l * size))
        for l, pair in enumerate(pairs, start=1)
    }


def resolve_solver(name: str, scenario: ScenarioConfig, model: Any = None) -> Solver:
    """按名称返回帧求解器

    Args:
        name: exhaustive / alternating / mtl / none / random-phase
        scenario: 场景配置
        model: MTL 模型（name 为 mtl 时必需）

    Returns:
        (信道实现, 几何) → SolveReport
    """
    radio, power, config = scenario.radio, scenario.power, scenario.optimizer

    if name == SolveMethod.EXHAUSTIVE:
        return lambda realization, geometry: solve_exhaustive(realization, radio, power, config)
    if name == SolveMethod.ALTERNATING:
        return lambda realization, geometry: solve_alternating(realization, radio, power, config)
    if name == SolveMethod.NO_RIS:
        return lambda realization, geometry: solve_no_ris(realization, radio, power, config)
    if name == SolveMethod.RANDOM_PHASE:
        return lambda realization, geometry: solve_random_phase(
            realization, radio, power, config, seed=scenario.seed
        )
    if name == SolveMethod.MTL:
        if model is None:
            raise DomainError("mtl 求解器需要已训练的模型")
        from src.mtl.inference import solve_mtl

        return lambda realization, geometry: solve_mtl(model, realization, geometry, scenario)

    raise DomainError(f"未知求解器: {name}，可选 {SOLVER_NAMES}")


def aggregate_throughput(traces: list[FrameTrace]) -> dict:
    """帧吞吐量汇总：均值与 5/50/95 分位"""
    if not traces:
        return {
            "frames": 0,
            "s_mean": None,
            "s_p5": None,
            "s_p50": None,
            "s_p95": None,
            "r_mean": None,
            "p_mean": None,
            "overrun_frames": 0,
        }

    throughput = np.array([t.metrics.s_overall for t in traces])
    capacity = np.array([t.metrics.r_overall for t in traces])
    power = np.array([t.metrics.p_overall for t in traces])
    p5, p50, p95 = np.percentile(throughput, [5, 50, 95])
    return {
        "frames": len(traces),
        "s_mean": float(throughput.mean()),
        "s_p5": float(p5),
        "s_p50": float(p50),
        "s_p95": float(p95),
        "r_mean": float(capacity.mean()),
        "p_mean": float(power.mean()),
        "overrun_frames": sum(1 for t in traces if t.negotiation_overrun),
    }


def run_episode(
    scenario: ScenarioConfig,
    solver: str | Solver = SolveMethod.EXHAUSTIVE,
    model: Any = None
) -> EpisodeResult:
    """运行 I 帧仿真

    Args:
        scenario: 场景配置
        solver: 求解器名称或可调用对象
        model: MTL 模型

    Returns:
        EpisodeResult

    Raises:
        InfeasibleError: 某帧无可行解，frame_index 指明帧序号
    """
    protocol = scenario.protocol
    frame_solver = resolve_solver(solver, scenario, model) if isinstance(solver, str) else solver
    spacing = protocol.frame_duration if protocol.frame_spacing_s is None else protocol.frame_spacing_s
    method = solver if isinstance(solver, str) else getattr(solver, "__name__", "custom")

    geometry = scenario.geometry
    traces: list[FrameTrace] = []
    logger.info(
        f"开始仿真: K={scenario.radio.num_pairs}, N={scenario.radio.num_elements}, "
        f"I={protocol.num_frames}, 求解器={method}"
    )

    for frame in range(protocol.num_frames):
        if frame > 0:
            geometry = step_mobility(geometry, scenario.mobility, spacing)

        fading_index = frame if protocol.redraw_fading else 0
        realization = sample_realization(geometry, scenario.fading, frame_index=fading_index)

        try:
            report = frame_solver(realization, geometry)
        except InfeasibleError as e:
            raise e.at_frame(frame) from e

        t_negotiation = protocol.negotiation_duration
        overrun = False
        if protocol.couple_solver_time:
            t_negotiation = protocol.sync_duration + protocol.estimation_duration + report.elapsed
            if t_negotiation >= protocol.frame_duration:
                logger.warning(
                    f"frame {frame}: 协商耗时 {t_negotiation * 1e3:.3f} ms 超过帧长 "
                    f"{protocol.frame_duration * 1e3:.3f} ms，本帧吞吐量记为 0"
                )
                overrun = True

        metrics = evaluate(
            realization, report.best, scenario.radio, scenario.power,
            0.0 if overrun else t_negotiation, protocol.frame_duration
        )
        # 整帧都在协商，没有通信阶段
        if overrun:
            metrics.s_overall = 0.0
        for flag in report.flags:
            logger.warning(f"frame {frame}: {flag}")

        traces.append(FrameTrace(
            frame_index=frame,
            uav_positions=geometry.uav_positions.copy(),
            user_positions=geometry.user_positions.copy(),
            strategy=report.best,
            metrics=metrics,
            method=str(report.method),
            evaluated=report.evaluated,
            iterations=report.iterations,
            solver_time=report.elapsed,
            negotiation_overrun=overrun,
        ))
        logger.debug(
            f"frame {frame}: F={report.best.decision.tolist()}, "
            f"S={metrics.s_overall / 1e6:.4f} Mbps"
        )

    aggregate = aggregate_throughput(traces)
    if traces:
        logger.info(f"仿真完成: 平均吞吐量 {aggregate['s_mean'] / 1e6:.4f} Mbps")
    return EpisodeResult(traces=traces, aggregate=aggregate)
