"""
信道模型
路径损耗、UPA 阵列响应、瑞利/莱斯小尺度衰落，以及直射链路 ℏ、UAV→RIS 链路 g、RIS→用户链路 h
"""

from enum import IntEnum
from typing import Optional

import numpy as np

from src.errors import DomainError
from src.models import ChannelRealization, FadingParams, Geometry
from src.utils import db_to_linear


class Link(IntEnum):
    """随机数流标识"""
    DIRECT = 0
    UAV_RIS = 1
    RIS_USER = 2
    PLACEMENT = 3
    PHASES = 4


def link_rng(seed: int, frame: int, pair: int, link: int) -> np.random.Generator:
    """按 (seed, frame, pair, link) 派生的计数器型随机数生成器

    Args:
        seed: 场景种子
        frame: 帧序号
        pair: 用户对序号
        link: 链路类型

    Returns:
        Philox 生成器，相同键产生逐位相同的序列
    """
    sequence = np.random.SeedSequence([int(seed), int(frame), int(pair), int(link)])
    return np.random.Generator(np.random.Philox(sequence))


def cscg(rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """零均值单位方差循环对称复高斯"""
    real = rng.standard_normal(size)
    imag = rng.standard_normal(size)
    return (real + 1j * imag) / np.sqrt(2.0)


def reference_path_loss_db(ref_distance: float, freq_ghz: float) -> float:
    """参考距离处的 UMa LoS 路径损耗

    Args:
        ref_distance: 参考距离 d0（米）
        freq_ghz: 频率（GHz）

    Returns:
        28 + 22·log10(d0) + 20·log10(f)，单位 dB

    Raises:
        DomainError: 输入非正
    """
    if ref_distance <= 0 or freq_ghz <= 0:
        raise DomainError(f"路径损耗输入必须为正: d0={ref_distance}, f={freq_ghz}")
    return 28.0 + 22.0 * np.log10(ref_distance) + 20.0 * np.log10(freq_ghz)


def reference_gain(geometry: Geometry, fading: FadingParams) -> float:
    """h0 线性增益 10^(−PL/10)"""
    loss_db = reference_path_loss_db(fading.ref_distance, geometry.carrier_freq_hz / 1e9)
    return db_to_linear(-loss_db)


def path_gain(h0: float, distance: float, exponent: float) -> float:
    """大尺度功率增益 h0·d^(−τ)"""
    if distance <= 0:
        raise DomainError(f"链路距离必须为正: {distance}")
    return h0 * distance ** (-exponent)


def array_response(
    azimuth: float,
    elevation: float,
    rows: int,
    cols: int,
    spacing: float,
    wavelength: float
) -> np.ndarray:
    """UPA 阵列响应 a_R(φ, ϑ)

    第 (l_x, l_y) 个单元为 exp(j·2π/λ·d·(l_x·sinφ·sinϑ + l_y·cosϑ))，行优先展开

    Args:
        azimuth: 方位角 φ（弧度）
        elevation: 俯仰角 ϑ（弧度）
        rows: l_x 方向单元数
        cols: l_y 方向单元数
        spacing: 单元间距 d（米）
        wavelength: 波长 λ（米）

    Returns:
        长度 rows·cols 的单位模复向量
    """
    if rows * cols < 1:
        raise DomainError(f"阵列至少需要一个单元: {rows}x{cols}")
    if spacing <= 0 or wavelength <= 0:
        raise DomainError(f"间距和波长必须为正: d={spacing}, λ={wavelength}")

    lx = np.arange(rows)[:, None]
    ly = np.arange(cols)[None, :]
    phase = (2.0 * np.pi / wavelength) * spacing * (
        lx * np.sin(azimuth) * np.sin(elevation) + ly * np.cos(elevation)
    )
    return np.exp(1j * phase).ravel()


def ris_angles(
    point: np.ndarray,
    ris_position: np.ndarray,
    ris_normal: np.ndarray
) -> tuple[float, float]:
    """点相对 RIS 局部坐标系的 (方位角, 俯仰角)

    RIS 竖直安装于建筑立面：俯仰角从竖直轴量起，方位角在水平面内从法向量起

    Args:
        point: 目标点坐标
        ris_position: RIS 坐标
        ris_normal: RIS 水平法向

    Returns:
        (φ, ϑ)
    """
    offset = np.asarray(point, dtype=float) - np.asarray(ris_position, dtype=float)
    distance = float(np.linalg.norm(offset))
    if distance == 0:
        raise DomainError("目标点与 RIS 重合")
    direction = offset / distance

    normal = np.asarray(ris_normal, dtype=float).copy()
    normal[2] = 0.0
    normal /= np.linalg.norm(normal)
    vertical = np.array([0.0, 0.0, 1.0])
    horizontal = np.cross(vertical, normal)

    azimuth = float(np.arctan2(direction @ horizontal, direction @ normal))
    elevation = float(np.arccos(np.clip(direction @ vertical, -1.0, 1.0)))
    return azimuth, elevation


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    distance = float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    if distance == 0:
        raise DomainError("链路两端位置重合，距离为 0")
    return distance


def _check_group(geometry: Geometry, group_size: int, offset: int) -> None:
    n = geometry.num_elements
    if group_size < 1 or n % group_size != 0:
        raise DomainError(f"组大小 {group_size} 必须整除单元数 {n}")
    if offset < 0 or offset + group_size > n:
        raise DomainError(f"单元区间越界: [{offset}, {offset + group_size})")


def sample_direct(
    geometry: Geometry,
    fading: FadingParams,
    pair_index: int,
    rng: np.random.Generator,
    scattering: Optional[complex] = None
) -> complex:
    """直射链路 ℏ_k = sqrt(h0·d^(−τ))·h̄

    Args:
        geometry: 场景几何
        fading: 衰落参数
        pair_index: 用户对序号
        rng: 随机数生成器
        scattering: 指定散射分量 h̄（确定性模式），None 时采样 CSCG

    Returns:
        复增益
    """
    distance = _distance(geometry.uav_positions[pair_index], geometry.user_positions[pair_index])
    gain = path_gain(reference_gain(geometry, fading), distance, fading.pl_exp_direct)
    h_bar = complex(cscg(rng)) if scattering is None else complex(scattering)
    return np.sqrt(gain) * h_bar


def sample_uav_ris(
    geometry: Geometry,
    fading: FadingParams,
    pair_index: int,
    group_size: int,
    rng: np.random.Generator,
    offset: int = 0
) -> np.ndarray:
    """UAV→RIS 链路 g_k = sqrt(h0·d^(−τ))·a_R(φ_AoA, ϑ_AoA)

    纯视距，rng 不参与采样，保留参数以统一接口

    Args:
        geometry: 场景几何
        fading: 衰落参数
        pair_index: 用户对序号
        group_size: 返回的单元数
        rng: 随机数生成器
        offset: 起始单元（行优先）

    Returns:
        长度 group_size 的复向量
    """
    _check_group(geometry, group_size, offset)
    uav = geometry.uav_positions[pair_index]
    distance = _distance(uav, geometry.ris_position)
    gain = path_gain(reference_gain(geometry, fading), distance, fading.pl_exp_uav_ris)

    azimuth, elevation = ris_angles(uav, geometry.ris_position, geometry.ris_normal)
    response = array_response(
        azimuth, elevation, geometry.ris_rows, geometry.ris_cols,
        geometry.element_spacing, geometry.wavelength
    )
    return np.sqrt(gain) * response[offset:offset + group_size]


def sample_ris_user(
    geometry: Geometry,
    fading: FadingParams,
    pair_index: int,
    group_size: int,
    rng: np.random.Generator,
    offset: int = 0
) -> np.ndarray:
    """RIS→用户链路（莱斯衰落）

    h_k = sqrt(h0·d^(−τ))·(sqrt(α/(1+α))·a_R^H(φ_AoD, ϑ_AoD) + sqrt(1/(1+α))·ĥ_k)

    Args:
        geometry: 场景几何
        fading: 衰落参数
        pair_index: 用户对序号
        group_size: 返回的单元数
        rng: 随机数生成器
        offset: 起始单元（行优先）

    Returns:
        长度 group_size 的复向量
    """
    _check_group(geometry, group_size, offset)
    if fading.rician_k < 0:
        raise DomainError(f"莱斯因子必须非负: {fading.rician_k}")

    user = geometry.user_positions[pair_index]
    distance = _distance(user, geometry.ris_position)
    gain = path_gain(reference_gain(geometry, fading), distance, fading.pl_exp_ris_user)

    azimuth, elevation = ris_angles(user, geometry.ris_position, geometry.ris_normal)
    los = np.conj(array_response(
        azimuth, elevation, geometry.ris_rows, geometry.ris_cols,
        geometry.element_spacing, geometry.wavelength
    ))[offset:offset + group_size]
    # 始终采样整个阵列，保证不同分组切片来自同一实现
    nlos = cscg(rng, geometry.num_elements)[offset:offset + group_size]

    alpha = fading.rician_k
    mixed = np.sqrt(alpha / (1.0 + alpha)) * los + np.sqrt(1.0 / (1.0 + alpha)) * nlos
    return np.sqrt(gain) * mixed


def sample_realization(
    geometry: Geometry,
    fading: FadingParams,
    frame_index: int = 0
) -> ChannelRealization:
    """生成一帧的完整信道实现（天线增益计入 ℏ 和反射路径）

    Args:
        geometry: 场景几何
        fading: 衰落参数（含种子）
        frame_index: 帧序号

    Returns:
        ChannelRealization，g/h 为整阵列长度 N
    """
    num_pairs = geometry.num_pairs
    num_elements = geometry.num_elements
    antenna_gain = db_to_linear(fading.uav_antenna_gain_dbi + fading.user_antenna_gain_dbi)
    amplitude = np.sqrt(antenna_gain)

    direct = np.empty(num_pairs, dtype=complex)
    uav_to_ris = np.empty((num_pairs, num_elements), dtype=complex)
    ris_to_user = np.empty((num_pairs, num_elements), dtype=complex)

    for k in range(num_pairs):
        direct[k] = amplitude * sample_direct(
            geometry, fading, k, link_rng(fading.seed, frame_index, k, Link.DIRECT)
        )
        uav_to_ris[k] = amplitude * sample_uav_ris(
            geometry, fading, k, num_elements, link_rng(fading.seed, frame_index, k, Link.UAV_RIS)
        )
        ris_to_user[k] = sample_ris_user(
            geometry, fading, k, num_elements, link_rng(fading.seed, frame_index, k, Link.RIS_USER)
        )

    return ChannelRealization(
        direct=direct,
        uav_to_ris=uav_to_ris,
        ris_to_user=ris_to_user,
        frame_index=frame_index
    )


def group_channel(
    realization: ChannelRealization,
    pair_index: int,
    group_index: int,
    group_count: int
) -> tuple[complex, np.ndarray, np.ndarray]:
    """取某用户对在第 l 组（从 1 开始）上的信道

    Args:
        realization: 信道实现
        pair_index: 用户对序号
        group_index: 组号 l ∈ [1, L]
        group_count: 组数 L

    Returns:
        (ℏ_k, g_k 切片, h_k 切片)
    """
    num_elements = realization.num_elements
    if group_count < 1 or num_elements % group_count != 0:
        raise DomainError(f"组数 {group_count} 必须整除单元数 {num_elements}")
    if not 1 <= group_index <= group_count:
        raise DomainError(f"组号越界: {group_index} / {group_count}")

    size = num_elements // group_count
    start = (group_index - 1) * size
    return (
        complex(realization.direct[pair_index]),
        realization.uav_to_ris[pair_index, start:start + size],
        realization.ris_to_user[pair_index, start:start + size],
    )


def place_pairs(
    seed: int,
    num_pairs: int,
    uav_positions: list[list[float]],
    user_positions: list[list[float]],
    area: tuple[float, float],
    uav_altitude: tuple[float, float],
    user_altitude: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    """生成 K 对 UAV/用户坐标：显式给出的在前，其余在区域内均匀随机

    Args:
        seed: 场景种子
        num_pairs: K
        uav_positions: 显式 UAV 坐标
        user_positions: 显式用户坐标
        area: 水平区域 (x 宽, y 宽)
        uav_altitude: UAV 高度区间
        user_altitude: 用户高度区间

    Returns:
        (UAV 坐标 (K,3), 用户坐标 (K,3))
    """
    uavs = np.zeros((num_pairs, 3))
    users = np.zeros((num_pairs, 3))

    for k in range(num_pairs):
        rng = link_rng(seed, 0, k, Link.PLACEMENT)
        uav = rng.uniform([0.0, 0.0, uav_altitude[0]], [area[0], area[1], uav_altitude[1]])
        user = rng.uniform([0.0, 0.0, user_altitude[0]], [area[0], area[1], user_altitude[1]])
        uavs[k] = uav_positions[k] if k < len(uav_positions) else uav
        users[k] = user_positions[k] if k < len(user_positions) else user

    return uavs, users
