"""
通信与功耗模型
占用向量、带宽份额、SNR、功耗、容量与吞吐量公式，以及策略可行性校验
"""

from typing import Optional

import numpy as np

from src.errors import DomainError, InfeasibleError
from src.models import ChannelRealization, Metrics, PowerConfig, RadioConfig, Strategy
from src.simulator.channel import group_channel


TWO_PI = 2.0 * np.pi


def admissible_group_counts(num_elements: int, max_groups: int) -> list[int]:
    """可用的组数：N 的因子且不超过 L_max"""
    return [l for l in range(1, max_groups + 1) if num_elements % l == 0]


def decision_vector(occupation: np.ndarray) -> np.ndarray:
    """RIS 辅助决策向量 f(u_k)"""
    return (np.asarray(occupation) != 0).astype(int)


def element_share(occupation: np.ndarray) -> np.ndarray:
    """RIS 单元占用比例 p_k：辅助用户对为 1/L，其余为 0"""
    decision = decision_vector(occupation)
    group_count = int(decision.sum())
    if group_count == 0:
        return np.zeros(decision.shape, dtype=float)
    return decision / group_count


def bandwidth_share(occupation: np.ndarray, omega1: float, omega2: float) -> np.ndarray:
    """子载波带宽占用比例 c_k

    L = K 时按 ω1 = 1 处理，L = 0 时按 ω2 = 1 处理

    Args:
        occupation: 占用向量 U
        omega1: RIS 辅助带宽权重
        omega2: 直射带宽权重

    Returns:
        c_k 向量
    """
    decision = decision_vector(occupation)
    num_pairs = decision.size
    group_count = int(decision.sum())

    if group_count == num_pairs:
        omega1, omega2 = 1.0, 0.0
    elif group_count == 0:
        omega1, omega2 = 0.0, 1.0

    shares = element_share(occupation) * omega1
    if group_count < num_pairs:
        shares = np.where(decision == 0, omega2 / (num_pairs - group_count), shares)
    return shares


def reflected_sum(
    uav_to_ris: np.ndarray,
    ris_to_user: np.ndarray,
    phases: np.ndarray
) -> complex:
    """反射路径 h_k Θ_k g_k = Σ e^{jθ_n} h_n g_n"""
    return complex(np.sum(np.exp(1j * np.asarray(phases)) * ris_to_user * uav_to_ris))


def snr(
    direct: complex,
    uav_to_ris: Optional[np.ndarray],
    ris_to_user: Optional[np.ndarray],
    phases: Optional[np.ndarray],
    tx_power_w: float,
    noise_power_w: float
) -> float:
    """用户接收 SNR

    Args:
        direct: 直射增益 ℏ_k
        uav_to_ris: g_k（无 RIS 时为 None）
        ris_to_user: h_k（无 RIS 时为 None）
        phases: θ_k（无 RIS 时为 None）
        tx_power_w: 发射功率 ρ²
        noise_power_w: 噪声功率 σ²

    Returns:
        线性 SNR

    Raises:
        DomainError: σ² ≤ 0 或相位长度与信道不符
    """
    if noise_power_w <= 0:
        raise DomainError(f"噪声功率必须为正: {noise_power_w}")

    gain = complex(direct)
    if phases is not None:
        if uav_to_ris is None or ris_to_user is None:
            raise DomainError("给定相位时必须提供反射信道")
        if len(phases) != len(uav_to_ris) or len(phases) != len(ris_to_user):
            raise DomainError(
                f"相位长度 {len(phases)} 与信道长度 {len(uav_to_ris)}/{len(ris_to_user)} 不一致"
            )
        gain += reflected_sum(uav_to_ris, ris_to_user, phases)

    return float(abs(gain) ** 2 * tx_power_w / noise_power_w)


def required_tx_power(gain_amplitude: float, target_snr: float, noise_power_w: float) -> float:
    """达到目标 SNR 所需的发射功率 ρ² = SNR·σ²/|增益|²

    用于“发射功率”曲线的解读：固定目标 SNR 反解 ρ²
    """
    if gain_amplitude <= 0:
        raise DomainError("信道增益为 0，无法达到目标 SNR")
    return float(target_snr * noise_power_w / gain_amplitude ** 2)


def validate_strategy(
    strategy: Strategy,
    radio: RadioConfig,
    power: Optional[PowerConfig] = None
) -> None:
    """校验策略是否满足 C1–C9

    Args:
        strategy: 待校验策略
        radio: 无线参数
        power: 功耗参数，提供时检查 C6

    Raises:
        InfeasibleError: 违反的约束名写在 constraint 字段
    """
    occupation = np.asarray(strategy.occupation)
    num_pairs = radio.num_pairs

    if occupation.shape != (num_pairs,):
        raise InfeasibleError(f"占用向量长度应为 {num_pairs}", "C1")
    if not np.issubdtype(occupation.dtype, np.integer):
        if not np.all(np.equal(np.mod(occupation, 1), 0)):
            raise InfeasibleError("占用向量必须为整数组号", "C1")

    nonzero = occupation[occupation != 0]
    group_count = int(nonzero.size)

    if np.any(occupation < 0) or np.any(occupation > group_count):
        raise InfeasibleError(f"组号必须在 0..{group_count} 之间: {occupation.tolist()}", "C1")
    if len(set(nonzero.tolist())) != group_count:
        raise InfeasibleError(f"同一 RIS 组服务了多个用户对: {occupation.tolist()}", "C2")
    if group_count > 0 and radio.num_elements % group_count != 0:
        raise InfeasibleError(f"单元数 {radio.num_elements} 不能均分为 {group_count} 组", "C4")
    if group_count > radio.max_groups:
        raise InfeasibleError(f"组数 {group_count} 超过 L_max={radio.max_groups}", "C5")

    if len(strategy.phases) != num_pairs:
        raise InfeasibleError(f"相位列表长度应为 {num_pairs}", "C9")
    group_size = radio.num_elements // group_count if group_count else 0
    for k, theta in enumerate(strategy.phases):
        if occupation[k] == 0:
            if theta is not None:
                raise InfeasibleError(f"用户对 {k} 未分配 RIS 组却给出了相位", "C8")
            continue
        if theta is None or len(theta) != group_size:
            raise InfeasibleError(f"用户对 {k} 的相位长度应为 {group_size}", "C8")
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise InfeasibleError(f"用户对 {k} 的相位非有限值", "C8")
        if np.any(theta < 0) or np.any(theta >= TWO_PI):
            raise InfeasibleError(f"用户对 {k} 的相位超出 [0, 2π)", "C9")

    if power is not None:
        total = overall_power(occupation, element_share(occupation), power, radio.tx_power_w, num_pairs)
        if total > power.max_total_w:
            raise InfeasibleError(f"总功耗 {total:.3f} W 超过 P_max={power.max_total_w} W", "C6")


def pair_snrs(
    realization: ChannelRealization,
    strategy: Strategy,
    radio: RadioConfig,
    shares: Optional[np.ndarray] = None
) -> np.ndarray:
    """按策略计算每个用户对的 SNR"""
    occupation = np.asarray(strategy.occupation)
    group_count = strategy.group_count
    if shares is None:
        shares = bandwidth_share(occupation, radio.omega1, radio.omega2)

    values = np.zeros(radio.num_pairs)
    for k in range(radio.num_pairs):
        noise = radio.noise_power_w * shares[k] if radio.noise_scales_with_bandwidth else radio.noise_power_w
        if occupation[k] == 0:
            values[k] = snr(realization.direct[k], None, None, None, radio.tx_power_w, noise)
            continue
        direct, g, h = group_channel(realization, k, int(occupation[k]), group_count)
        values[k] = snr(direct, g, h, strategy.phases[k], radio.tx_power_w, noise)
    return values


def overall_capacity(
    realization: ChannelRealization,
    strategy: Strategy,
    radio: RadioConfig
) -> Metrics:
    """系统总容量 R_overall = R_RIS + R_DL

    Args:
        realization: 信道实现
        strategy: 可行策略
        radio: 无线参数

    Returns:
        仅含速率与 SNR 的 Metrics

    Raises:
        InfeasibleError: 策略违反约束
    """
    validate_strategy(strategy, radio)

    occupation = np.asarray(strategy.occupation)
    shares = bandwidth_share(occupation, radio.omega1, radio.omega2)
    snrs = pair_snrs(realization, strategy, radio, shares)
    rates = shares * radio.bandwidth_hz * np.log2(1.0 + snrs)

    decision = decision_vector(occupation)
    r_ris = float(np.sum(rates * decision))
    r_dl = float(np.sum(rates * (1 - decision)))
    return Metrics(
        snr_per_pair=snrs,
        rate_per_pair=rates,
        r_ris=r_ris,
        r_dl=r_dl,
        r_overall=r_ris + r_dl,
    )


def overall_power(
    occupation: np.ndarray,
    shares: np.ndarray,
    power: PowerConfig,
    tx_power_w: float,
    num_pairs: int
) -> float:
    """系统总功耗 P_o

    P_o = K·μ·ρ² + Σ_k (P_{k,U} + f(u_k)·P_{k,u} + (1−f(u_k))·P'_{k,u} + p_k·P_R)
    """
    decision = decision_vector(occupation)
    per_pair = (
        power.uav_static_w
        + decision * power.user_static_ris_w
        + (1 - decision) * power.user_static_direct_w
        + np.asarray(shares) * power.ris_total_w
    )
    return float(num_pairs * power.amp_inv_efficiency * tx_power_w + np.sum(per_pair))


def protocol_throughput(r_overall_star: float, t_negotiation: float, t_frame: float) -> float:
    """帧结构下的吞吐量 S = (1 − T_N/T_F)·R*

    Raises:
        DomainError: T_N ≥ T_F 或时长为负
    """
    if t_negotiation < 0 or t_frame <= 0 or t_negotiation >= t_frame:
        raise DomainError(f"需要 0 ≤ T_N < T_F: T_N={t_negotiation}, T_F={t_frame}")
    return (1.0 - t_negotiation / t_frame) * r_overall_star


def evaluate(
    realization: ChannelRealization,
    strategy: Strategy,
    radio: RadioConfig,
    power: PowerConfig,
    t_negotiation: float,
    t_frame: float
) -> Metrics:
    """完整指标：速率、功耗、吞吐量"""
    metrics = overall_capacity(realization, strategy, radio)
    occupation = np.asarray(strategy.occupation)
    metrics.p_overall = overall_power(
        occupation, element_share(occupation), power, radio.tx_power_w, radio.num_pairs
    )
    metrics.s_overall = protocol_throughput(metrics.r_overall, t_negotiation, t_frame)
    return metrics
