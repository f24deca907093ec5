"""
工具函数模块
提供日志、配置、JSON 读写、配置哈希、计时等工具函数
"""

import hashlib
import json
import statistics
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np
from loguru import logger


def setup_logger(
    name: str = "ris-uav-optimizer",
    log_dir: str = "logs",
    level: str = "INFO",
    file_sink: bool = True
) -> None:
    """配置日志器

    Args:
        name: 日志器名称
        log_dir: 日志目录
        level: 日志级别
        file_sink: 是否写入日志文件
    """
    # 移除默认处理器
    logger.remove()

    # 控制台输出走 stderr，stdout 留给 CSV/JSON
    logger.add(
        sink=sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>",
        level=level,
        colorize=True,
    )

    if not file_sink:
        return

    log_path = Path(log_dir)
    log_path.mkdir(parents=True, exist_ok=True)

    # 文件输出
    logger.add(
        sink=log_path / "{time:YYYY-MM-DD}.log",
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} | {message}",
        level=level,
        rotation="100 MB",
        retention="7 days",
        encoding="utf-8",
    )
    logger.debug(f"{name} 日志已初始化: {log_path}")


def load_config(config_path: str) -> dict:
    """加载 YAML 配置文件

    Args:
        config_path: 配置文件路径

    Returns:
        配置字典

    Raises:
        FileNotFoundError: 配置文件不存在
        yaml.YAMLError: YAML格式错误
    """
    import yaml

    config_file = Path(config_path)

    if not config_file.exists():
        raise FileNotFoundError(f"配置文件不存在: {config_path}")

    with open(config_file, "r", encoding="utf-8") as f:
        config = yaml.safe_load(f)

    return config if config else {}


def _to_jsonable(value: Any) -> Any:
    """把 numpy 类型转换成 JSON 可序列化对象"""
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def save_json(
    data: dict,
    filepath: str,
    indent: int = 2,
    ensure_ascii: bool = False
) -> None:
    """保存JSON文件（键排序，保证重复运行字节一致）

    Args:
        data: 要保存的数据
        filepath: 文件路径
        indent: 缩进空格数
        ensure_ascii: 是否确保ASCII编码
    """
    file_path = Path(filepath)

    # 创建父目录
    file_path.parent.mkdir(parents=True, exist_ok=True)

    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(_to_jsonable(data), f, indent=indent, ensure_ascii=ensure_ascii, sort_keys=True)
        f.write("\n")


def config_hash(resolved: dict) -> str:
    """计算已解析配置的哈希（规范化 JSON 的 sha256 前 12 位）

    Args:
        resolved: 已解析的配置字典

    Returns:
        12 位十六进制字符串
    """
    canonical = json.dumps(_to_jsonable(resolved), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def median_time(func: Callable[[], Any], repeats: int = 5) -> float:
    """单调时钟下多次执行取中位耗时

    Args:
        func: 无参可调用对象
        repeats: 重复次数

    Returns:
        中位耗时（秒）
    """
    timings = []
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        func()
        timings.append(time.perf_counter() - start)
    return statistics.median(timings)


def format_duration(seconds: float) -> str:
    """格式化时长

    Args:
        seconds: 秒数

    Returns:
        格式化后的时长字符串（如：1:23 或 850.0 µs）
    """
    if seconds < 1e-3:
        return f"{seconds * 1e6:.1f} µs"
    if seconds < 1:
        return f"{seconds * 1e3:.2f} ms"

    minutes = int(seconds // 60)
    secs = seconds % 60
    if minutes > 0:
        return f"{minutes}:{secs:05.2f}"
    return f"{secs:.2f} s"


def db_to_linear(value_db: float) -> float:
    """dB 转线性"""
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    """dBm 转瓦"""
    return 10.0 ** (value_dbm / 10.0) / 1000.0


def linear_to_db(value: float, floor: float = 1e-30) -> float:
    """线性转 dB（下限截断，避免 log(0)）"""
    return 10.0 * float(np.log10(max(value, floor)))
