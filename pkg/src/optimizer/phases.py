"""
RIS 相位闭式配置
θ* = arg(ℏ) − arg(h) − arg(g)，使每个反射项与直射路径同相
"""

import numpy as np


TWO_PI = 2.0 * np.pi


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """把相位折回 [0, 2π)"""
    wrapped = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # np.mod 对极小负数可能返回 2π
    wrapped[wrapped >= TWO_PI] = 0.0
    return wrapped


def optimal_phases(
    direct: complex,
    uav_to_ris: np.ndarray,
    ris_to_user: np.ndarray,
    per_element: bool = True
) -> np.ndarray:
    """按直射路径对齐的最优相位

    Args:
        direct: 直射增益 ℏ_k；为 0 时取 arg(ℏ) = 0，只让反射项彼此对齐
        uav_to_ris: 组内 g_k
        ris_to_user: 组内 h_k
        per_element: True 时逐单元对齐；False 时整组共用一个相位，
            以组内第一个单元的信道作为代表

    Returns:
        [0, 2π) 内的相位向量，长度与组大小一致
    """
    uav_to_ris = np.asarray(uav_to_ris)
    ris_to_user = np.asarray(ris_to_user)
    if uav_to_ris.shape != ris_to_user.shape:
        raise ValueError(f"g/h 长度不一致: {uav_to_ris.shape} vs {ris_to_user.shape}")

    reference = np.angle(direct) if direct != 0 else 0.0
    if per_element:
        theta = reference - np.angle(ris_to_user) - np.angle(uav_to_ris)
    else:
        theta = np.full(
            uav_to_ris.shape,
            reference - np.angle(ris_to_user[0]) - np.angle(uav_to_ris[0])
        )
    return wrap_phase(theta)


def aligned_gain(direct: complex, uav_to_ris: np.ndarray, ris_to_user: np.ndarray) -> float:
    """对齐后可达到的幅度上界 |ℏ| + Σ|h_n||g_n|"""
    return float(abs(direct) + np.sum(np.abs(ris_to_user) * np.abs(uav_to_ris)))
