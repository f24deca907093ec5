"""
数据模型定义
定义场景配置、信道实现、传输策略、性能指标等所有数据结构
"""

from dataclasses import dataclass, field
from enum import StrEnum
from typing import Optional

import numpy as np


SPEED_OF_LIGHT = 299_792_458.0


@dataclass
class Geometry:
    """场景几何（单位：米）"""
    uav_positions: np.ndarray        # UAV 坐标 (K, 3)
    user_positions: np.ndarray       # 用户坐标 (K, 3)
    ris_position: np.ndarray         # RIS 中心坐标 (3,)
    ris_rows: int                    # l_x 方向单元数
    ris_cols: int                    # l_y 方向单元数
    element_spacing: float           # 单元间距 d
    carrier_freq_hz: float           # 载频 f
    ris_normal: np.ndarray = field(
        default_factory=lambda: np.array([-1.0, 0.0, 0.0])
    )                                # RIS 法向（水平，指向服务区）

    @property
    def wavelength(self) -> float:
        """载波波长 λ = c/f"""
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def num_pairs(self) -> int:
        return int(self.uav_positions.shape[0])

    @property
    def num_elements(self) -> int:
        return self.ris_rows * self.ris_cols


@dataclass
class FadingParams:
    """衰落与链路预算参数"""
    rician_k: float = 10.0           # 莱斯因子 α
    pl_exp_direct: float = 3.5       # τ_{k,Uu}
    pl_exp_uav_ris: float = 2.2      # τ_{k,UR}
    pl_exp_ris_user: float = 2.8     # τ_{k,Ru}
    ref_distance: float = 1.0        # 参考距离 d0（米）
    seed: int = 0
    uav_antenna_gain_dbi: float = 10.0
    user_antenna_gain_dbi: float = 5.0


@dataclass
class ChannelRealization:
    """单帧信道实现

    uav_to_ris / ris_to_user 保存整个阵列（长度 N），
    分组后每个用户对取连续的 N/L 段
    """
    direct: np.ndarray               # ℏ_k (K,)
    uav_to_ris: np.ndarray           # g_k (K, N)
    ris_to_user: np.ndarray          # h_k (K, N)
    frame_index: int = 0

    @property
    def num_pairs(self) -> int:
        return int(self.direct.shape[0])

    @property
    def num_elements(self) -> int:
        return int(self.uav_to_ris.shape[1])


@dataclass
class RadioConfig:
    """无线参数"""
    num_pairs: int                   # K
    num_elements: int                # N
    num_subcarriers: int = 8         # C
    bandwidth_hz: float = 10e6       # B
    omega1: float = 0.6              # ω1
    omega2: float = 0.4              # ω2
    tx_power_w: float = 0.01         # ρ²
    noise_power_w: float = 10 ** (-94 / 10) / 1000   # σ²
    max_groups: int = 8              # L_max
    noise_scales_with_bandwidth: bool = False


@dataclass
class PowerConfig:
    """功耗模型参数（单位：瓦）"""
    amp_inv_efficiency: float = 1.25     # μ = 1/ν
    uav_static_w: float = 0.5            # P_{k,U}
    user_static_ris_w: float = 0.1       # P_{k,u}
    user_static_direct_w: float = 0.05   # P'_{k,u}
    ris_total_w: float = 0.512           # P_R
    max_total_w: float = 100.0           # P_max


@dataclass
class ProtocolConfig:
    """帧协议参数（单位：秒）"""
    frame_duration: float = 1e-3         # T_F
    sync_duration: float = 0.02e-3       # t_s1
    estimation_duration: float = 0.05e-3  # t_s2
    optimization_duration: float = 0.03e-3  # t_s3
    num_frames: int = 10                 # I
    frame_spacing_s: Optional[float] = None   # 相邻仿真帧的时间间隔，None 表示 T_F
    redraw_fading: bool = True
    couple_solver_time: bool = False

    @property
    def negotiation_duration(self) -> float:
        """T_N = t_s1 + t_s2 + t_s3"""
        return self.sync_duration + self.estimation_duration + self.optimization_duration


@dataclass
class MobilityConfig:
    """移动参数（沿 +x 方向，m/s）"""
    uav_velocity: float = 25.0
    user_velocity: float = 0.5


@dataclass
class OptimizerConfig:
    """求解器参数"""
    phase_mode: str = "per_element"      # per_element / per_group
    max_iter: int = 50
    tol: float = 1e-9
    workers: int = 1


@dataclass
class MtlConfig:
    """多任务学习超参数"""
    hidden_sizes: list[int] = field(default_factory=lambda: [128, 128])
    optimizer: str = "sgd"               # sgd（动量）/ adam
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 200
    patience: int = 20
    val_fraction: float = 0.1
    loss_weights: tuple[float, float] = (0.5, 0.5)   # (ξ_c, ξ_r)
    circular_loss: bool = False
    mask_unassisted: bool = True
    seed: int = 0
    dataset_size: int = 1000
    model_path: str = "data/models/mtl_k{K}.bin"
    phase_source: str = "predicted"      # predicted / closed_form


@dataclass
class ScenarioConfig:
    """完整场景配置"""
    geometry: Geometry
    fading: FadingParams
    radio: RadioConfig
    power: PowerConfig
    protocol: ProtocolConfig
    mobility: MobilityConfig
    optimizer: OptimizerConfig
    mtl: MtlConfig
    seed: int = 0
    placement_area: tuple[float, float] = (100.0, 100.0)
    uav_altitude: tuple[float, float] = (250.0, 300.0)
    user_altitude: tuple[float, float] = (0.0, 1.0)


@dataclass
class Strategy:
    """传输策略 D = {U, Ψ}"""
    occupation: np.ndarray                       # u_k ∈ {0, 1..L} (K,)
    phases: list[Optional[np.ndarray]]           # θ_k，仅 u_k ≠ 0 时存在

    @property
    def decision(self) -> np.ndarray:
        """f(u_k)"""
        return (self.occupation != 0).astype(int)

    @property
    def group_count(self) -> int:
        """L = Σ f(u_k)"""
        return int(np.count_nonzero(self.occupation))


@dataclass
class Metrics:
    """性能指标"""
    snr_per_pair: np.ndarray                     # 线性 SNR
    rate_per_pair: np.ndarray                    # bit/s
    r_ris: float
    r_dl: float
    r_overall: float
    p_overall: float = 0.0                       # W
    s_overall: float = 0.0                       # bit/s


class SolveMethod(StrEnum):
    """求解方法"""
    EXHAUSTIVE = "exhaustive"
    ALTERNATING = "alternating"
    CLOSED_FORM_ALL_RIS = "closed_form_all_ris"
    CLOSED_FORM_NO_RIS = "closed_form_no_ris"
    NO_RIS = "none"
    RANDOM_PHASE = "random-phase"
    MTL = "mtl"


@dataclass
class AllocationCandidate:
    """分配候选 F"""
    decision: np.ndarray             # 二值向量 (K,)
    group_count: int                 # L = ΣF


@dataclass
class SolveReport:
    """求解报告"""
    best: Strategy
    objective: float                 # R*_overall（bit/s）
    evaluated: int                   # 评估的候选数
    iterations: int                  # 迭代次数 ℓ
    elapsed: float                   # 秒
    method: SolveMethod
    history: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)


@dataclass
class FrameTrace:
    """单帧仿真记录"""
    frame_index: int
    uav_positions: np.ndarray
    user_positions: np.ndarray
    strategy: Strategy
    metrics: Metrics
    method: str
    evaluated: int = 0
    iterations: int = 0
    solver_time: float = 0.0
    negotiation_overrun: bool = False            # 实测协商耗时 ≥ T_F，本帧吞吐量记为 0


@dataclass
class EpisodeResult:
    """一次仿真的全部帧及汇总"""
    traces: list[FrameTrace]
    aggregate: dict


@dataclass
class Sample:
    """训练样本"""
    features: np.ndarray             # X_j
    class_label: np.ndarray          # f(u_k) (K,)
    reg_label: np.ndarray            # Ψ*/2π (K,)，未辅助的用户对填 0


@dataclass
class TrainReport:
    """训练报告"""
    epoch_losses: list[tuple[float, float, float]]   # (ι, ι_c, ι_r)
    final_accuracy: float
    final_mse: float
    wall_clock: float
    epochs_run: int = 0
    stopped_early: bool = False
