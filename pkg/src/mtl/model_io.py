"""
模型文件读写
格式：魔数 | uint16 版本 | uint32 清单长度 | JSON 清单 | 行优先 float64 权重块（小端）
"""

import json
import struct
from pathlib import Path

import numpy as np
from loguru import logger

from src.errors import ModelFormatError
from src.mtl.network import MtlModel


MAGIC = b"RISMTL\0"
HEADER = struct.Struct("<HI")


def model_manifest(model: MtlModel) -> dict:
    """层结构清单"""
    tensors = [{"name": name, "shape": list(model.params[name].shape)} for name in model.tensor_names()]
    tensors.append({"name": "feature_mean", "shape": [model.input_size]})
    tensors.append({"name": "feature_std", "shape": [model.input_size]})
    return {
        "version": MtlModel.VERSION,
        "input_size": model.input_size,
        "num_pairs": model.num_pairs,
        "hidden_sizes": model.hidden_sizes,
        "loss_weights": list(model.loss_weights),
        "circular_loss": model.circular_loss,
        "mask_unassisted": model.mask_unassisted,
        "tensors": tensors,
        "meta": model.meta,
    }


def save_model(model: MtlModel, path: str) -> Path:
    """写出模型文件

    Args:
        model: 模型
        path: 输出路径

    Returns:
        文件路径
    """
    manifest = json.dumps(model_manifest(model), sort_keys=True).encode("utf-8")
    blobs = [model.params[name] for name in model.tensor_names()] + [model.feature_mean, model.feature_std]

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "wb") as f:
        f.write(MAGIC)
        f.write(HEADER.pack(MtlModel.VERSION, len(manifest)))
        f.write(manifest)
        for blob in blobs:
            f.write(np.ascontiguousarray(blob, dtype="<f8").tobytes(order="C"))

    logger.info(f"模型已保存: {file_path}")
    return file_path


def read_manifest(path: str) -> tuple[dict, bytes]:
    """读取清单和剩余的权重字节"""
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"模型文件不存在: {path}")

    data = file_path.read_bytes()
    if not data.startswith(MAGIC):
        raise ModelFormatError(f"不是模型文件（魔数不匹配）: {path}")
    offset = len(MAGIC)
    if len(data) < offset + HEADER.size:
        raise ModelFormatError(f"模型文件头不完整: {path}")

    version, length = HEADER.unpack_from(data, offset)
    if version != MtlModel.VERSION:
        raise ModelFormatError(f"模型版本 {version} 不受支持（当前 {MtlModel.VERSION}）")
    offset += HEADER.size
    try:
        manifest = json.loads(data[offset:offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"模型清单损坏: {e}") from e
    return manifest, data[offset + length:]


def load_model(path: str) -> MtlModel:
    """读取模型文件

    Raises:
        FileNotFoundError: 文件不存在
        ModelFormatError: 魔数、版本或权重长度不匹配
    """
    manifest, payload = read_manifest(path)
    model = MtlModel(
        input_size=manifest["input_size"],
        num_pairs=manifest["num_pairs"],
        hidden_sizes=manifest["hidden_sizes"],
        loss_weights=tuple(manifest["loss_weights"]),
        circular_loss=manifest["circular_loss"],
        mask_unassisted=manifest["mask_unassisted"],
    )
    model.meta = manifest.get("meta", {})

    offset = 0
    for tensor in manifest["tensors"]:
        shape = tuple(tensor["shape"])
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(payload):
            raise ModelFormatError(f"权重 {tensor['name']} 数据不完整")
        values = np.frombuffer(payload[offset:end], dtype="<f8").reshape(shape).astype(float)
        offset = end

        if tensor["name"] == "feature_mean":
            model.feature_mean = values
        elif tensor["name"] == "feature_std":
            model.feature_std = values
        elif tensor["name"] in model.params and model.params[tensor["name"]].shape == shape:
            model.params[tensor["name"]] = values
        else:
            raise ModelFormatError(f"未知或形状不符的权重: {tensor['name']} {shape}")

    if offset != len(payload):
        raise ModelFormatError("模型文件末尾有多余数据")
    return model
