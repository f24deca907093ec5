"""
训练数据集
随机生成场景实例，用穷举求解器打标签，并以 CSV 形式持久化
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from loguru import logger

from src.errors import DomainError, InfeasibleError
from src.models import ChannelRealization, Geometry, Sample, ScenarioConfig, SolveReport
from src.mtl.features import extract_features
from src.optimizer.exhaustive import solve_exhaustive
from src.optimizer.phases import TWO_PI
from src.simulator.channel import place_pairs, sample_realization
from src.simulator.system import validate_strategy


def sample_seed(seed: int, index: int) -> int:
    """第 index 个样本的派生种子"""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def sample_instance(scenario: ScenarioConfig, index: int) -> tuple[Geometry, ChannelRealization]:
    """场景采样器：在放置区域内随机摆放 K 对 UAV/用户，并生成信道

    Args:
        scenario: 场景配置（RIS 位置、衰落参数、放置区域）
        index: 样本序号

    Returns:
        (几何, 信道实现)
    """
    seed = sample_seed(scenario.seed, index)
    uavs, users = place_pairs(
        seed, scenario.radio.num_pairs, [], [],
        scenario.placement_area, scenario.uav_altitude, scenario.user_altitude
    )
    geometry = dataclasses.replace(scenario.geometry, uav_positions=uavs, user_positions=users)
    fading = dataclasses.replace(scenario.fading, seed=seed)
    return geometry, sample_realization(geometry, fading, frame_index=0)


def labels_from_report(report: SolveReport) -> tuple[np.ndarray, np.ndarray]:
    """求解结果 → (分类标签 F, 回归标签 θ/2π)

    回归标签取每个辅助用户对所在组第一个单元的相位，未辅助的用户对填 0
    """
    decision = report.best.decision
    reg = np.zeros(decision.size)
    for k in np.flatnonzero(decision):
        reg[k] = float(report.best.phases[k][0]) / TWO_PI
    return decision, reg


def collect_dataset(
    scenario: ScenarioConfig,
    size: int,
    solver: Optional[Callable[..., SolveReport]] = None,
    workers: int = 1
) -> list[Sample]:
    """生成训练数据集

    Args:
        scenario: 场景配置
        size: 样本数
        solver: 打标签用的求解器，默认穷举
        workers: 并行线程数

    Returns:
        样本列表，按序号排列；无可行解的样本被跳过
    """
    if size < 0:
        raise DomainError(f"数据集大小必须非负: {size}")
    solver = solver or solve_exhaustive

    def _collect(index: int) -> Optional[Sample]:
        geometry, realization = sample_instance(scenario, index)
        try:
            report = solver(realization, scenario.radio, scenario.power, scenario.optimizer)
            validate_strategy(report.best, scenario.radio, scenario.power)
        except InfeasibleError as e:
            logger.warning(f"样本 {index} 无可行解，已跳过: {e}")
            return None

        decision, reg = labels_from_report(report)
        features = extract_features(realization, geometry, scenario.radio, scenario.placement_area)
        return Sample(features=features, class_label=decision, reg_label=reg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_collect, range(size)))
    else:
        results = [_collect(i) for i in range(size)]

    samples = [s for s in results if s is not None]
    logger.info(f"数据集生成完成: {len(samples)}/{size} 个样本")
    return samples


def to_arrays(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """样本列表 → (X, F, Ψ/2π) 矩阵"""
    if not samples:
        raise DomainError("数据集为空")
    features = np.vstack([s.features for s in samples])
    class_labels = np.vstack([s.class_label for s in samples]).astype(int)
    reg_labels = np.vstack([s.reg_label for s in samples])
    return features, class_labels, reg_labels


def split_dataset(
    samples: list[Sample],
    train_fraction: float,
    seed: int = 0
) -> tuple[list[Sample], list[Sample]]:
    """按比例随机划分训练/测试集

    Args:
        samples: 样本
        train_fraction: 训练集比例 (0, 1]
        seed: 打乱种子

    Returns:
        (训练集, 测试集)
    """
    if not 0 < train_fraction <= 1:
        raise DomainError(f"训练集比例必须在 (0, 1]: {train_fraction}")
    order = np.random.default_rng(seed).permutation(len(samples))
    cut = int(round(train_fraction * len(samples)))
    return [samples[i] for i in order[:cut]], [samples[i] for i in order[cut:]]


def save_dataset(
    samples: list[Sample],
    path: str,
    num_features: Optional[int] = None,
    num_pairs: Optional[int] = None
) -> Path:
    """写出数据集 CSV（表头 feat_*, cls_*, reg_*）

    Args:
        samples: 样本
        path: 输出路径
        num_features: 样本为空时用于生成表头
        num_pairs: 样本为空时用于生成表头

    Returns:
        文件路径
    """
    if samples:
        num_features = samples[0].features.size
        num_pairs = samples[0].class_label.size
    if num_features is None or num_pairs is None:
        raise DomainError("空数据集需要指定特征维度和用户对数")

    columns = (
        [f"feat_{i}" for i in range(num_features)]
        + [f"cls_{k}" for k in range(num_pairs)]
        + [f"reg_{k}" for k in range(num_pairs)]
    )
    rows = [
        np.concatenate([s.features, s.class_label, s.reg_label]) for s in samples
    ]
    frame = pd.DataFrame(rows, columns=columns) if rows else pd.DataFrame(columns=columns)
    for k in range(num_pairs):
        frame[f"cls_{k}"] = frame[f"cls_{k}"].astype(int)

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(file_path, index=False, encoding="utf-8")
    logger.info(f"数据集已写入: {file_path} ({len(samples)} 行)")
    return file_path


def load_dataset(path: str) -> list[Sample]:
    """读取数据集 CSV"""
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"数据集不存在: {path}")

    frame = pd.read_csv(file_path, float_precision="round_trip")
    feat_cols = [c for c in frame.columns if c.startswith("feat_")]
    cls_cols = [c for c in frame.columns if c.startswith("cls_")]
    reg_cols = [c for c in frame.columns if c.startswith("reg_")]
    if not feat_cols or not cls_cols or len(cls_cols) != len(reg_cols):
        raise DomainError(f"数据集表头不完整: {path}")

    features = frame[feat_cols].to_numpy(dtype=float)
    class_labels = frame[cls_cols].to_numpy(dtype=int)
    reg_labels = frame[reg_cols].to_numpy(dtype=float)
    return [
        Sample(features=features[i], class_label=class_labels[i], reg_label=reg_labels[i])
        for i in range(len(frame))
    ]
