"""
场景配置
YAML 场景文件经 pydantic 校验（未知字段报错）后转换为 ScenarioConfig，
并输出注入默认值后的完整配置及其哈希
"""

import copy
import os
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError
from src.models import (
    FadingParams,
    Geometry,
    MobilityConfig,
    MtlConfig,
    OptimizerConfig,
    PowerConfig,
    ProtocolConfig,
    RadioConfig,
    ScenarioConfig,
    SPEED_OF_LIGHT,
)
from src.simulator.channel import place_pairs
from src.utils import config_hash, dbm_to_watts, load_config


DEFAULT_SCENARIO = "config/scenario.yaml"

Point = tuple[float, float, float]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometrySection(_Section):
    """几何：RIS 与 UAV/用户位置"""
    ris_position: Point = (100.0, 75.0, 120.0)
    ris_rows: int = Field(16, ge=1)
    ris_cols: int = Field(32, ge=1)
    element_spacing_wavelengths: float = Field(0.5, gt=0)
    carrier_freq_ghz: float = Field(5.0, gt=0)
    ris_normal: Point = (-1.0, 0.0, 0.0)
    uav_positions: list[Point] = Field(default_factory=lambda: [(20.0, 80.0, 280.0)])
    user_positions: list[Point] = Field(default_factory=lambda: [(10.0, 30.0, 1.0)])
    placement_area: tuple[float, float] = (100.0, 100.0)
    uav_altitude: tuple[float, float] = (250.0, 300.0)
    user_altitude: tuple[float, float] = (0.0, 1.0)

    @field_validator("ris_normal")
    @classmethod
    def _horizontal_normal(cls, value: Point) -> Point:
        if value[0] == 0 and value[1] == 0:
            raise ValueError("RIS 法向必须有水平分量")
        return value

    @model_validator(mode="after")
    def _paired_positions(self) -> "GeometrySection":
        if len(self.uav_positions) != len(self.user_positions):
            raise ValueError(
                f"uav_positions 与 user_positions 数量必须相同: "
                f"{len(self.uav_positions)} != {len(self.user_positions)}"
            )
        return self


class FadingSection(_Section):
    """衰落"""
    rician_k: float = Field(10.0, ge=0)
    pl_exp_direct: float = Field(3.5, ge=2)
    pl_exp_uav_ris: float = Field(2.2, ge=2)
    pl_exp_ris_user: float = Field(2.8, ge=2)
    ref_distance: float = Field(1.0, gt=0)
    uav_antenna_gain_dbi: float = 10.0
    user_antenna_gain_dbi: float = 5.0


class RadioSection(_Section):
    """无线参数"""
    num_pairs: int = Field(8, ge=1)
    num_subcarriers: int = Field(8, ge=1)
    bandwidth_mhz: float = Field(10.0, gt=0)
    omega: tuple[float, float] = (0.6, 0.4)
    tx_power_mw: float = Field(10.0, gt=0)
    noise_power_dbm: float = -94.0
    max_groups: int = Field(8, ge=1)
    noise_scales_with_bandwidth: bool = False

    @field_validator("omega")
    @classmethod
    def _omega_weights(cls, value: tuple[float, float]) -> tuple[float, float]:
        if min(value) < 0 or abs(sum(value) - 1.0) > 1e-9:
            raise ValueError("带宽权重必须非负且 ω1 + ω2 = 1")
        return value


class PowerSection(_Section):
    """功耗（瓦）"""
    amp_inv_efficiency: float = Field(1.25, ge=1)
    uav_static_w: float = Field(0.5, ge=0)
    user_static_ris_w: float = Field(0.1, ge=0)
    user_static_direct_w: float = Field(0.05, ge=0)
    ris_total_w: float = Field(0.512, ge=0)
    max_total_w: float = Field(100.0, gt=0)


class ProtocolSection(_Section):
    """帧协议（毫秒）"""
    frame_duration_ms: float = Field(1.0, gt=0)
    sync_ms: float = Field(0.02, ge=0)
    estimation_ms: float = Field(0.05, ge=0)
    optimization_ms: float = Field(0.03, ge=0)
    num_frames: int = Field(10, ge=0)
    frame_spacing_s: Optional[float] = Field(None, ge=0)
    redraw_fading: bool = True
    couple_solver_time: bool = False

    @model_validator(mode="after")
    def _negotiation_fits(self) -> "ProtocolSection":
        negotiation = self.sync_ms + self.estimation_ms + self.optimization_ms
        if negotiation >= self.frame_duration_ms:
            raise ValueError(f"协商时长 {negotiation} ms 必须小于帧长 {self.frame_duration_ms} ms")
        return self


class MobilitySection(_Section):
    """沿 +x 的速度（m/s）"""
    uav_velocity: float = 25.0
    user_velocity: float = 0.5


class OptimizerSection(_Section):
    """求解器"""
    phase_mode: Literal["per_element", "per_group"] = "per_element"
    max_iter: int = Field(50, ge=1)
    tol: float = Field(1e-9, ge=0)
    workers: int = Field(1, ge=1)


class MtlSection(_Section):
    """多任务学习"""
    hidden_sizes: list[int] = Field(default_factory=lambda: [128, 128], min_length=1)
    optimizer: Literal["sgd", "adam"] = "sgd"
    learning_rate: float = Field(1e-3, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    batch_size: int = Field(64, ge=1)
    epochs: int = Field(200, ge=0)
    patience: int = Field(20, ge=0)
    val_fraction: float = Field(0.1, ge=0, lt=1)
    loss_weights: tuple[float, float] = (0.5, 0.5)
    circular_loss: bool = False
    mask_unassisted: bool = True
    seed: int = Field(0, ge=0)
    dataset_size: int = Field(1000, ge=0)
    model_path: str = "data/models/mtl_k{K}.bin"
    phase_source: Literal["predicted", "closed_form"] = "predicted"

    @field_validator("hidden_sizes")
    @classmethod
    def _positive_widths(cls, value: list[int]) -> list[int]:
        if any(width < 1 for width in value):
            raise ValueError("隐藏层宽度必须为正")
        return value

    @field_validator("loss_weights")
    @classmethod
    def _nonnegative_weights(cls, value: tuple[float, float]) -> tuple[float, float]:
        if min(value) < 0:
            raise ValueError("损失权重必须非负")
        return value


class ScenarioFile(_Section):
    """场景文件根节点 scenario"""
    seed: int = Field(0, ge=0)
    geometry: GeometrySection = Field(default_factory=GeometrySection)
    fading: FadingSection = Field(default_factory=FadingSection)
    radio: RadioSection = Field(default_factory=RadioSection)
    power: PowerSection = Field(default_factory=PowerSection)
    protocol: ProtocolSection = Field(default_factory=ProtocolSection)
    mobility: MobilitySection = Field(default_factory=MobilitySection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    mtl: MtlSection = Field(default_factory=MtlSection)

    @model_validator(mode="after")
    def _positions_within_pairs(self) -> "ScenarioFile":
        explicit = len(self.geometry.uav_positions)
        if explicit > self.radio.num_pairs:
            raise ValueError(
                f"geometry 显式给出 {explicit} 对位置，超过 radio.num_pairs={self.radio.num_pairs}"
            )
        return self


def default_scenario_path() -> str:
    """默认场景文件路径（.env 中的 RIS_SCENARIO 优先）"""
    load_dotenv()
    return os.getenv("RIS_SCENARIO", DEFAULT_SCENARIO)


def deep_update(base: dict, overrides: dict) -> dict:
    """递归合并字典（返回新字典）"""
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_update(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_scenario(data: Optional[dict], overrides: Optional[dict] = None) -> ScenarioFile:
    """校验场景字典

    Args:
        data: scenario 节点下的内容
        overrides: 叠加的覆盖项（如命令行 --seed、扫描变量）

    Returns:
        ScenarioFile

    Raises:
        ConfigError: 校验失败，field_path 指向第一个出错字段
    """
    data = deep_update(data or {}, overrides or {})
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field_path = ".".join(["scenario", *(str(part) for part in first["loc"])])
        raise ConfigError(first["msg"], field_path) from e


def resolved_dict(scenario_file: ScenarioFile) -> dict:
    """注入默认值后的完整配置"""
    return {"scenario": scenario_file.model_dump(mode="json")}


def build_scenario(scenario_file: ScenarioFile) -> ScenarioConfig:
    """ScenarioFile → ScenarioConfig（单位换算、补齐随机位置）"""
    geo = scenario_file.geometry
    radio = scenario_file.radio
    seed = scenario_file.seed

    uavs, users = place_pairs(
        seed, radio.num_pairs,
        [list(p) for p in geo.uav_positions], [list(p) for p in geo.user_positions],
        geo.placement_area, geo.uav_altitude, geo.user_altitude
    )
    carrier_hz = geo.carrier_freq_ghz * 1e9
    geometry = Geometry(
        uav_positions=uavs,
        user_positions=users,
        ris_position=np.array(geo.ris_position, dtype=float),
        ris_rows=geo.ris_rows,
        ris_cols=geo.ris_cols,
        element_spacing=geo.element_spacing_wavelengths * SPEED_OF_LIGHT / carrier_hz,
        carrier_freq_hz=carrier_hz,
        ris_normal=np.array(geo.ris_normal, dtype=float),
    )

    proto = scenario_file.protocol
    return ScenarioConfig(
        geometry=geometry,
        fading=FadingParams(seed=seed, **scenario_file.fading.model_dump()),
        radio=RadioConfig(
            num_pairs=radio.num_pairs,
            num_elements=geometry.num_elements,
            num_subcarriers=radio.num_subcarriers,
            bandwidth_hz=radio.bandwidth_mhz * 1e6,
            omega1=radio.omega[0],
            omega2=radio.omega[1],
            tx_power_w=radio.tx_power_mw / 1000.0,
            noise_power_w=dbm_to_watts(radio.noise_power_dbm),
            max_groups=radio.max_groups,
            noise_scales_with_bandwidth=radio.noise_scales_with_bandwidth,
        ),
        power=PowerConfig(**scenario_file.power.model_dump()),
        protocol=ProtocolConfig(
            frame_duration=proto.frame_duration_ms / 1000.0,
            sync_duration=proto.sync_ms / 1000.0,
            estimation_duration=proto.estimation_ms / 1000.0,
            optimization_duration=proto.optimization_ms / 1000.0,
            num_frames=proto.num_frames,
            frame_spacing_s=proto.frame_spacing_s,
            redraw_fading=proto.redraw_fading,
            couple_solver_time=proto.couple_solver_time,
        ),
        mobility=MobilityConfig(**scenario_file.mobility.model_dump()),
        optimizer=OptimizerConfig(**scenario_file.optimizer.model_dump()),
        mtl=MtlConfig(**scenario_file.mtl.model_dump()),
        seed=seed,
        placement_area=geo.placement_area,
        uav_altitude=geo.uav_altitude,
        user_altitude=geo.user_altitude,
    )


class LoadedScenario(BaseModel):
    """加载结果：场景、完整配置、哈希"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario: Any
    resolved: dict
    hash: str
    source: str = ""


def load_scenario_data(path: Optional[str] = None) -> dict:
    """读取场景 YAML 中 scenario 节点的原始内容"""
    path = path or default_scenario_path()
    try:
        raw = load_config(path)
    except FileNotFoundError as e:
        raise ConfigError(str(e), "scenario") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML 格式错误: {e}", "scenario") from e

    if not isinstance(raw, dict):
        raise ConfigError("场景文件根节点必须是映射", "scenario")
    unknown = set(raw) - {"scenario"}
    if unknown:
        raise ConfigError(f"未知的顶层字段: {sorted(unknown)}", sorted(unknown)[0])
    return raw.get("scenario") or {}


def load_scenario(path: Optional[str] = None, overrides: Optional[dict] = None) -> LoadedScenario:
    """加载并校验场景文件

    Args:
        path: 场景文件路径，None 时使用默认路径
        overrides: 覆盖项

    Returns:
        LoadedScenario

    Raises:
        ConfigError: 文件不存在、YAML 错误或 schema 校验失败
    """
    path = path or default_scenario_path()
    return scenario_from_data(load_scenario_data(path), overrides, source=str(Path(path)))


def scenario_from_data(
    data: Optional[dict],
    overrides: Optional[dict] = None,
    source: str = ""
) -> LoadedScenario:
    """从 scenario 节点字典构造 LoadedScenario"""
    scenario_file = parse_scenario(data, overrides)
    resolved = resolved_dict(scenario_file)
    return LoadedScenario(
        scenario=build_scenario(scenario_file),
        resolved=resolved,
        hash=config_hash(resolved),
        source=source,
    )
