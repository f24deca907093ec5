"""
特征构造
把一帧的几何与信道压缩成固定长度的特征向量 X_j（每个模型对应固定的 K）
"""

import numpy as np

from src.models import ChannelRealization, Geometry, RadioConfig
from src.optimizer.allocation import admissible_levels
from src.utils import linear_to_db


# 每个用户对的标量特征：直射 SNR(dB)、arg(ℏ)、整阵列对齐反射 SNR(dB)、UAV x、用户 x
PAIR_SCALARS = 5


def group_starts(radio: RadioConfig) -> list[int]:
    """所有可取 L 下各组的起始单元（升序去重）"""
    starts = set()
    for level in admissible_levels(radio):
        if level == 0:
            continue
        size = radio.num_elements // level
        starts.update(l * size for l in range(level))
    return sorted(starts)


def feature_size(radio: RadioConfig) -> int:
    """特征维度"""
    per_pair = PAIR_SCALARS + 2 * len(group_starts(radio))
    return radio.num_pairs * per_pair + 2 + radio.num_pairs


def extract_features(
    realization: ChannelRealization,
    geometry: Geometry,
    radio: RadioConfig,
    area: tuple[float, float]
) -> np.ndarray:
    """构造特征向量

    每个用户对：直射 SNR、arg(ℏ)、整阵列对齐后的反射 SNR、归一化 x 坐标，
    以及每个可能的组起始单元上闭式相位的 cos/sin；
    全局：log2(N)、K、min(L_max, K) 的 one-hot

    Args:
        realization: 信道实现
        geometry: 场景几何
        radio: 无线参数
        area: 放置区域，用于归一化坐标

    Returns:
        一维特征向量
    """
    starts = group_starts(radio)
    scale = radio.tx_power_w / radio.noise_power_w
    width = float(area[0]) if area[0] > 0 else 1.0
    blocks = []

    for k in range(radio.num_pairs):
        direct = complex(realization.direct[k])
        g = realization.uav_to_ris[k]
        h = realization.ris_to_user[k]
        reflected = float(np.sum(np.abs(g) * np.abs(h)))
        reference = np.angle(direct) if direct != 0 else 0.0
        theta = reference - np.angle(h[starts]) - np.angle(g[starts])

        blocks.append(np.concatenate([
            [
                linear_to_db(scale * abs(direct) ** 2),
                np.angle(direct),
                linear_to_db(scale * reflected ** 2),
                geometry.uav_positions[k, 0] / width,
                geometry.user_positions[k, 0] / width,
            ],
            np.cos(theta),
            np.sin(theta),
        ]))

    level_one_hot = np.zeros(radio.num_pairs)
    level_one_hot[min(radio.max_groups, radio.num_pairs) - 1] = 1.0
    blocks.append([np.log2(radio.num_elements), float(radio.num_pairs)])
    blocks.append(level_one_hot)
    return np.concatenate(blocks)
