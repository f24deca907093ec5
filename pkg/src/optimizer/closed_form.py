"""
闭式特例
全部用户对都接入 RIS（L = K）与全部直射（L = 0）两种情形下的最大总容量，用作求解器的校验基准
"""

import numpy as np

from src.errors import DomainError
from src.models import ChannelRealization, RadioConfig
from src.optimizer.phases import aligned_gain
from src.simulator.channel import group_channel


def _noise(radio: RadioConfig, share: float) -> float:
    if radio.noise_scales_with_bandwidth:
        return radio.noise_power_w * share
    return radio.noise_power_w


def closed_form_all_ris(realization: ChannelRealization, radio: RadioConfig) -> float:
    """全部用户对接入 RIS 时的最大总容量

    (B/K)·Σ_k log2(1 + ρ²(|ℏ_k| + Σ_n |h_n||g_n|)²/σ²)，第 k 对使用第 k 组（N/K 个单元）

    Args:
        realization: 信道实现
        radio: 无线参数

    Returns:
        总容量（bit/s）

    Raises:
        DomainError: K 不能整除 N
    """
    num_pairs = realization.num_pairs
    if realization.num_elements % num_pairs != 0:
        raise DomainError(f"用户对数 {num_pairs} 不能整除单元数 {realization.num_elements}")

    share = 1.0 / num_pairs
    noise = _noise(radio, share)
    total = 0.0
    for k in range(num_pairs):
        direct, g, h = group_channel(realization, k, k + 1, num_pairs)
        amplitude = aligned_gain(direct, g, h)
        total += np.log2(1.0 + radio.tx_power_w * amplitude ** 2 / noise)
    return float(share * radio.bandwidth_hz * total)


def closed_form_no_ris(realization: ChannelRealization, radio: RadioConfig) -> float:
    """不使用 RIS 时的总容量 (B/K)·Σ_k log2(1 + |ℏ_k·ρ|²/σ²)"""
    num_pairs = realization.num_pairs
    share = 1.0 / num_pairs
    noise = _noise(radio, share)
    snrs = np.abs(realization.direct) ** 2 * radio.tx_power_w / noise
    return float(share * radio.bandwidth_hz * np.sum(np.log2(1.0 + snrs)))
