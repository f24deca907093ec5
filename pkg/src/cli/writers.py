"""
结果输出
长格式结果表（每行一个指标），每行都带配置哈希与种子；CSV/JSON 两种格式
"""

from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from loguru import logger

from src.models import EpisodeResult
from src.utils import linear_to_db, save_json


RESULT_COLUMNS = [
    "experiment",
    "sweep_var",
    "sweep_value",
    "index",
    "metric",
    "value",
    "seed",
    "config_hash",
]

SORT_COLUMNS = ["experiment", "sweep_var", "sweep_value", "metric", "index"]


class ResultTable:
    """长格式结果表（只追加）"""

    def __init__(self, experiment: str, seed: int, config_hash: str):
        self.experiment = experiment
        self.seed = seed
        self.config_hash = config_hash
        self.rows: list[dict] = []

    def add(
        self,
        metric: str,
        value: float,
        index: int = 0,
        sweep_var: str = "",
        sweep_value: float = 0.0,
        seed: Optional[int] = None
    ) -> None:
        self.rows.append({
            "experiment": self.experiment,
            "sweep_var": sweep_var,
            "sweep_value": float(sweep_value),
            "index": int(index),
            "metric": metric,
            "value": float(value),
            "seed": self.seed if seed is None else int(seed),
            "config_hash": self.config_hash,
        })

    def extend(self, rows: list[dict]) -> None:
        self.rows.extend(rows)

    def to_frame(self) -> pd.DataFrame:
        """按固定顺序排序后的 DataFrame"""
        frame = pd.DataFrame(self.rows, columns=RESULT_COLUMNS)
        if frame.empty:
            return frame
        return frame.sort_values(SORT_COLUMNS, kind="mergesort").reset_index(drop=True)


def write_table(table: ResultTable, out_dir: str, name: str, fmt: str = "csv") -> Path:
    """写出结果表

    Args:
        table: 结果表
        out_dir: 输出目录
        name: 文件名（不含扩展名）
        fmt: csv / json

    Returns:
        文件路径
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    frame = table.to_frame()

    if fmt == "csv":
        file_path = out_path / f"{name}.csv"
        frame.to_csv(file_path, index=False, encoding="utf-8")
    elif fmt == "json":
        file_path = out_path / f"{name}.json"
        save_json({"rows": frame.to_dict(orient="records")}, str(file_path))
    else:
        raise ValueError(f"未知输出格式: {fmt}")

    logger.info(f"结果已写入: {file_path} ({len(frame)} 行)")
    return file_path


def read_table(path: str) -> pd.DataFrame:
    """读取长格式 CSV（round_trip 精度，保证写 → 读 → 写幂等）"""
    return pd.read_csv(
        path,
        float_precision="round_trip",
        dtype={"experiment": str, "sweep_var": str, "metric": str, "config_hash": str},
        keep_default_na=False,
    )


def trace_table(episode: EpisodeResult, seed: int, config_hash: str, experiment: str = "simulate") -> ResultTable:
    """逐帧记录 → 长格式结果表（不含求解耗时，保证重复运行结果一致）"""
    table = ResultTable(experiment, seed, config_hash)
    for trace in episode.traces:
        metrics = trace.metrics
        frame = trace.frame_index
        table.add("s_overall", metrics.s_overall, frame)
        table.add("r_overall", metrics.r_overall, frame)
        table.add("r_ris", metrics.r_ris, frame)
        table.add("r_dl", metrics.r_dl, frame)
        table.add("p_overall", metrics.p_overall, frame)
        table.add("group_count", trace.strategy.group_count, frame)
        table.add("evaluated", trace.evaluated, frame)
        table.add("iterations", trace.iterations, frame)
        table.add("negotiation_overrun", int(trace.negotiation_overrun), frame)
        for k in range(trace.strategy.occupation.size):
            table.add(f"occupation_pair{k}", trace.strategy.occupation[k], frame)
            table.add(f"snr_db_pair{k}", linear_to_db(metrics.snr_per_pair[k]), frame)
            table.add(f"rate_pair{k}", metrics.rate_per_pair[k], frame)
            table.add(f"uav_x_pair{k}", trace.uav_positions[k, 0], frame)
            table.add(f"user_x_pair{k}", trace.user_positions[k, 0], frame)
    return table


def write_aggregate(
    episode: EpisodeResult,
    out_dir: str,
    name: str,
    seed: int,
    config_hash: str,
    solver: str
) -> Path:
    """写出汇总 JSON"""
    file_path = Path(out_dir) / f"{name}.json"
    save_json({
        "aggregate": episode.aggregate,
        "seed": seed,
        "config_hash": config_hash,
        "solver": solver,
        "frames": len(episode.traces),
        "mean_group_count": float(np.mean([t.strategy.group_count for t in episode.traces]))
        if episode.traces else None,
    }, str(file_path))
    logger.info(f"汇总已写入: {file_path}")
    return file_path
