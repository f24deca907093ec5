"""
实验
SNR/发射功率/吞吐量随组数 L、用户对数 K、移动距离 Δd 的扫描，MTL 随训练比例与 K 的评估，推理耗时对比
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Optional

import numpy as np
from loguru import logger

from src.cli.writers import ResultTable
from src.config import LoadedScenario, scenario_from_data
from src.models import ChannelRealization, Metrics, RadioConfig, Sample, ScenarioConfig, SolveMethod
from src.mtl.dataset import collect_dataset, sample_instance, split_dataset
from src.mtl.features import extract_features, feature_size
from src.mtl.inference import infer
from src.mtl.network import MtlModel
from src.mtl.trainer import evaluate as evaluate_model
from src.mtl.trainer import train
from src.optimizer.allocation import build_strategy, phase_rule
from src.optimizer.exhaustive import solve_exhaustive
from src.optimizer.phases import aligned_gain
from src.simulator.channel import group_channel, sample_realization
from src.simulator.protocol import resolve_solver, run_episode, step_mobility
from src.simulator.system import admissible_group_counts, evaluate, required_tx_power
from src.utils import db_to_linear, linear_to_db, median_time


def _run_points(points: list[Any], task: Callable[[Any], list[dict]], workers: int) -> list[dict]:
    """并行执行扫描点，按输入顺序合并结果"""
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(task, points))
    else:
        chunks = [task(p) for p in points]
    return [row for chunk in chunks for row in chunk]


def _usable_levels(radio: RadioConfig, values: list[int]) -> list[int]:
    """过滤不可取的组数（超过 K 或 L_max，或不能整除 N）"""
    levels = []
    for level in values:
        if level < 1 or level > min(radio.num_pairs, radio.max_groups) or radio.num_elements % level != 0:
            logger.warning(f"L={level} 不可取（K={radio.num_pairs}, N={radio.num_elements}），跳过")
            continue
        levels.append(level)
    return levels


def _nested_groups(
    realization: ChannelRealization,
    scenario: ScenarioConfig,
    level: int,
    target_snr_db: float
) -> tuple[Metrics, list[float]]:
    """前 L 对依次占用第 1..L 组

    Returns:
        (指标, 各辅助对达到目标 SNR 所需的发射功率)
    """
    radio = scenario.radio
    decision = np.array([1] * level + [0] * (radio.num_pairs - level))
    strategy, _ = build_strategy(decision, realization, phase_rule(scenario.optimizer.phase_mode))
    metrics = evaluate(
        realization, strategy, radio, scenario.power,
        scenario.protocol.negotiation_duration, scenario.protocol.frame_duration
    )
    powers = []
    for k in range(level):
        direct, g, h = group_channel(realization, k, k + 1, level)
        powers.append(
            required_tx_power(aligned_gain(direct, g, h), db_to_linear(target_snr_db), radio.noise_power_w)
        )
    return metrics, powers


def sweep_groups(
    data: dict,
    values: list[int],
    target_snr_db: float = 20.0,
    workers: int = 1
) -> list[dict]:
    """SNR / 所需发射功率 / 吞吐量随组数 L 的变化

    第 l 组固定分给第 l 对（前 L 对接入 RIS），每帧独立采样信道

    Args:
        data: scenario 节点
        values: L 的取值
        target_snr_db: 反解发射功率时的目标 SNR
        workers: 并行线程数

    Returns:
        结果行
    """
    loaded = scenario_from_data(data)
    scenario = loaded.scenario
    levels = _usable_levels(scenario.radio, values)

    def _frame(frame: int) -> list[dict]:
        table = ResultTable("sweep_groups", scenario.seed, loaded.hash)
        realization = sample_realization(scenario.geometry, scenario.fading, frame_index=frame)
        for level in levels:
            metrics, powers = _nested_groups(realization, scenario, level, target_snr_db)
            table.add("s_overall", metrics.s_overall, frame, "groups", level)
            for k in range(level):
                table.add(f"snr_db_pair{k}", linear_to_db(metrics.snr_per_pair[k]), frame, "groups", level)
                table.add(f"tx_power_w_pair{k}", powers[k], frame, "groups", level)
        return table.rows

    frames = list(range(max(1, scenario.protocol.num_frames)))
    logger.info(f"组数扫描: L={levels}, {len(frames)} 帧")
    return _run_points(frames, _frame, workers)


def sweep_pairs(
    data: dict,
    values: list[int],
    schemes: list[str],
    models: Optional[dict[int, MtlModel]] = None,
    workers: int = 1
) -> list[dict]:
    """各方案吞吐量随用户对数 K 的变化

    Args:
        data: scenario 节点
        values: K 的取值
        schemes: 方案（none / random-phase / alternating / exhaustive / mtl）
        models: {K: MTL 模型}，缺失时跳过该 K 的 mtl 方案
        workers: 并行线程数

    Returns:
        结果行，总吞吐量与每对平均吞吐量
    """
    models = models or {}

    def _point(num_pairs: int) -> list[dict]:
        loaded = scenario_from_data(data, {"radio": {"num_pairs": num_pairs}})
        table = ResultTable("sweep_pairs", loaded.scenario.seed, loaded.hash)
        for scheme in schemes:
            if scheme == SolveMethod.MTL and num_pairs not in models:
                logger.warning(f"K={num_pairs} 没有 MTL 模型，跳过 mtl 方案")
                continue
            episode = run_episode(loaded.scenario, scheme, models.get(num_pairs))
            for trace in episode.traces:
                s = trace.metrics.s_overall
                table.add(f"s_overall.{scheme}", s, trace.frame_index, "pairs", num_pairs)
                table.add(f"s_per_pair.{scheme}", s / num_pairs, trace.frame_index, "pairs", num_pairs)
        return table.rows

    logger.info(f"用户对数扫描: K={values}, 方案={schemes}")
    return _run_points(list(values), _point, workers)


def sweep_distance(
    data: dict,
    values: list[float],
    solver: str = SolveMethod.ALTERNATING,
    model: Optional[MtlModel] = None,
    workers: int = 1,
    levels: Optional[list[int]] = None,
    target_snr_db: float = 20.0
) -> list[dict]:
    """吞吐量、SNR 与所需发射功率随 UAV 移动距离 Δd 的变化

    UAV 沿 x 轴移动 Δd，用户按速度比例同步移动。
    除求解器给出的结果外，对每个 L 按前 L 对占用前 L 组记录第 1 对的 SNR 与所需发射功率

    Args:
        data: scenario 节点
        values: Δd（米）
        solver: 求解器名称
        model: MTL 模型
        workers: 并行线程数
        levels: 对比的组数 L，None 时取全部可取值
        target_snr_db: 反解发射功率时的目标 SNR

    Returns:
        结果行
    """
    loaded = scenario_from_data(data)
    scenario = loaded.scenario
    radio = scenario.radio
    frame_solver = resolve_solver(solver, scenario, model)
    if levels is None:
        levels = admissible_group_counts(radio.num_elements, min(radio.num_pairs, radio.max_groups))
    levels = _usable_levels(radio, levels)

    def _point(shift: float) -> list[dict]:
        table = ResultTable("sweep_distance", scenario.seed, loaded.hash)
        velocity = scenario.mobility.uav_velocity
        if velocity > 0:
            geometry = step_mobility(scenario.geometry, scenario.mobility, shift / velocity)
        else:
            uavs = scenario.geometry.uav_positions.copy()
            uavs[:, 0] += shift
            geometry = dataclasses.replace(scenario.geometry, uav_positions=uavs)

        for frame in range(max(1, scenario.protocol.num_frames)):
            realization = sample_realization(geometry, scenario.fading, frame_index=frame)
            report = frame_solver(realization, geometry)
            metrics = evaluate(
                realization, report.best, radio, scenario.power,
                scenario.protocol.negotiation_duration, scenario.protocol.frame_duration
            )
            table.add("s_overall", metrics.s_overall, frame, "distance", shift)
            table.add("snr_db_pair0", linear_to_db(metrics.snr_per_pair[0]), frame, "distance", shift)
            table.add("group_count", report.best.group_count, frame, "distance", shift)

            for level in levels:
                nested, powers = _nested_groups(realization, scenario, level, target_snr_db)
                table.add(f"snr_db_pair0.L{level}", linear_to_db(nested.snr_per_pair[0]), frame, "distance", shift)
                table.add(f"tx_power_w_pair0.L{level}", powers[0], frame, "distance", shift)
        return table.rows

    logger.info(f"距离扫描: Δd={values}, 求解器={solver}, L={levels}")
    return _run_points(list(values), _point, workers)


def _fit_and_score(
    table: ResultTable,
    scenario: ScenarioConfig,
    samples: list[Sample],
    fraction: float,
    seed: int,
    sweep_var: str,
    sweep_value: float
) -> None:
    """按比例划分、训练并在测试集上评估，结果写入 table"""
    train_set, test_set = split_dataset(samples, fraction, seed)
    if not train_set or not test_set:
        logger.warning(f"{sweep_var}={sweep_value} 时训练集或测试集为空，跳过")
        return
    config = dataclasses.replace(scenario.mtl, seed=seed)
    model, _ = train(train_set, config, scenario.radio.num_elements, scenario.radio.max_groups)
    accuracy, mse = evaluate_model(model, test_set, scenario.radio.num_elements, scenario.radio.max_groups)
    table.add("accuracy", accuracy, 0, sweep_var, sweep_value, seed=seed)
    table.add("mse", mse, 0, sweep_var, sweep_value, seed=seed)


def mtl_fraction_eval(
    loaded: LoadedScenario,
    samples: list[Sample],
    fractions: list[float],
    seeds: list[int],
    workers: int = 1
) -> list[dict]:
    """准确率 / MSE 随训练集比例的变化

    Args:
        loaded: 场景
        samples: 数据集
        fractions: 训练集比例
        seeds: 划分与初始化种子
        workers: 并行线程数

    Returns:
        结果行（seed 列为划分种子）
    """
    points = [(fraction, seed) for fraction in fractions for seed in seeds]

    def _point(point: tuple[float, int]) -> list[dict]:
        fraction, seed = point
        table = ResultTable("mtl_eval", seed, loaded.hash)
        _fit_and_score(table, loaded.scenario, samples, fraction, seed, "train_fraction", fraction)
        return table.rows

    logger.info(f"训练比例评估: {fractions} x 种子 {seeds}")
    return _run_points(points, _point, workers)


def mtl_pairs_eval(
    data: dict,
    values: list[int],
    size: int,
    seeds: list[int],
    fraction: float = 0.9,
    workers: int = 1
) -> list[dict]:
    """准确率 / MSE 随用户对数 K 的变化（固定数据集规模与训练比例）

    Args:
        data: scenario 节点
        values: K 的取值
        size: 每个 K 的样本数
        seeds: 划分与初始化种子
        fraction: 训练集比例
        workers: 生成数据集的并行线程数

    Returns:
        结果行
    """
    rows: list[dict] = []
    for num_pairs in values:
        loaded = scenario_from_data(data, {"radio": {"num_pairs": num_pairs}})
        scenario = loaded.scenario
        samples = collect_dataset(scenario, size, workers=workers)
        for seed in seeds:
            table = ResultTable("mtl_eval", seed, loaded.hash)
            _fit_and_score(table, scenario, samples, fraction, seed, "pairs", num_pairs)
            rows.extend(table.rows)
        logger.info(f"K={num_pairs}: {len(samples)} 个样本, 种子 {seeds}")
    return rows


def mtl_bench(
    data: dict,
    values: list[int],
    repeats: int = 5,
    models: Optional[dict[int, MtlModel]] = None
) -> list[dict]:
    """单样本推理耗时与穷举求解耗时对比（单调时钟，取中位数）

    没有已训练模型的 K 使用同结构的随机初始化模型，推理耗时与权重取值无关

    Args:
        data: scenario 节点
        values: K 的取值
        repeats: 重复次数
        models: {K: MTL 模型}

    Returns:
        结果行
    """
    models = models or {}
    rows: list[dict] = []
    for num_pairs in values:
        loaded = scenario_from_data(data, {"radio": {"num_pairs": num_pairs}})
        scenario = loaded.scenario
        table = ResultTable("mtl_bench", scenario.seed, loaded.hash)

        geometry, realization = sample_instance(scenario, 0)
        features = extract_features(realization, geometry, scenario.radio, scenario.placement_area)
        model = models.get(num_pairs) or MtlModel(
            input_size=feature_size(scenario.radio),
            num_pairs=num_pairs,
            hidden_sizes=scenario.mtl.hidden_sizes,
            seed=scenario.mtl.seed,
        )

        exhaustive_s = median_time(
            lambda: solve_exhaustive(realization, scenario.radio, scenario.power, scenario.optimizer), repeats
        )
        mtl_s = median_time(lambda: infer(model, features, scenario.radio, scenario.power), repeats)

        table.add("exhaustive_s", exhaustive_s, 0, "pairs", num_pairs)
        table.add("mtl_s", mtl_s, 0, "pairs", num_pairs)
        table.add("speedup", exhaustive_s / mtl_s if mtl_s > 0 else float("inf"), 0, "pairs", num_pairs)
        logger.info(f"K={num_pairs}: 穷举 {exhaustive_s * 1e3:.3f} ms, MTL {mtl_s * 1e3:.3f} ms")
        rows.extend(table.rows)
    return rows
