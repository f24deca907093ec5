"""
API 接口端点
"""

from typing import Optional

import numpy as np
from fastapi import APIRouter, HTTPException
from loguru import logger
from pydantic import BaseModel, Field

from src.errors import DomainError, InfeasibleError, RisError
from src.models import ChannelRealization, SolveMethod, Strategy
from src.mtl.inference import infer
from src.mtl.model_io import model_manifest
from src.simulator.channel import sample_realization
from src.simulator.protocol import resolve_solver
from src.simulator.system import evaluate

router = APIRouter()

# 全局服务引用（在 main.py 中设置）
service = None


def set_service(svc):
    """设置服务实例"""
    global service
    service = svc


class ChannelPayload(BaseModel):
    """信道实现，复数以 [实部, 虚部] 表示"""
    direct: list[tuple[float, float]]
    uav_to_ris: list[list[tuple[float, float]]]
    ris_to_user: list[list[tuple[float, float]]]


class SolveRequest(BaseModel):
    """求解请求"""
    method: str = Field(SolveMethod.EXHAUSTIVE, description="exhaustive / alternating / none / random-phase")
    frame_index: int = Field(0, ge=0, description="未提供信道时按场景采样的帧序号")
    channels: Optional[ChannelPayload] = None


class InferRequest(BaseModel):
    """推理请求"""
    features: list[float]


class StrategyInfo(BaseModel):
    """策略"""
    occupation: list[int]
    phases: list[Optional[list[float]]]
    group_count: int


class ApiResponse(BaseModel):
    """通用响应"""
    success: bool
    message: str
    data: Optional[dict] = None


def _complex_array(values) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    return array[..., 0] + 1j * array[..., 1]


def _realization_from_payload(payload: ChannelPayload) -> ChannelRealization:
    direct = _complex_array(payload.direct)
    uav_to_ris = _complex_array(payload.uav_to_ris)
    ris_to_user = _complex_array(payload.ris_to_user)
    if uav_to_ris.ndim != 2 or uav_to_ris.shape != ris_to_user.shape or uav_to_ris.shape[0] != direct.size:
        raise DomainError(f"信道形状不一致: ℏ {direct.shape}, g {uav_to_ris.shape}, h {ris_to_user.shape}")
    return ChannelRealization(direct=direct, uav_to_ris=uav_to_ris, ris_to_user=ris_to_user)


def _strategy_info(strategy: Strategy) -> StrategyInfo:
    return StrategyInfo(
        occupation=[int(u) for u in strategy.occupation],
        phases=[None if theta is None else [float(t) for t in theta] for theta in strategy.phases],
        group_count=strategy.group_count,
    )


def _raise_http(e: RisError) -> None:
    status = 409 if isinstance(e, InfeasibleError) else 422
    raise HTTPException(status_code=status, detail=str(e))


@router.get("/health")
async def health():
    """健康检查"""
    return {
        "status": "ok",
        "model_loaded": service is not None and service.model is not None,
    }


@router.post("/api/solve", response_model=ApiResponse)
def solve(request: SolveRequest):
    """求解传输策略（提供信道时使用请求中的信道，否则按场景采样）

    同步函数，在线程池中执行
    """
    if service is None:
        raise HTTPException(status_code=500, detail="服务未初始化")
    if request.method == SolveMethod.MTL:
        raise HTTPException(status_code=422, detail="MTL 推理请使用 /api/infer")

    scenario = service.loaded.scenario
    logger.info(f"接收到求解请求: method={request.method}")

    try:
        if request.channels is not None:
            realization = _realization_from_payload(request.channels)
            if (realization.num_pairs, realization.num_elements) != (
                scenario.radio.num_pairs, scenario.radio.num_elements
            ):
                raise DomainError(
                    f"信道尺寸 (K={realization.num_pairs}, N={realization.num_elements}) 与场景不一致"
                )
        else:
            realization = sample_realization(scenario.geometry, scenario.fading, request.frame_index)

        solver = resolve_solver(request.method, scenario)
        report = solver(realization, scenario.geometry)
        metrics = evaluate(
            realization, report.best, scenario.radio, scenario.power,
            scenario.protocol.negotiation_duration, scenario.protocol.frame_duration
        )
    except RisError as e:
        logger.warning(f"求解失败: {e}")
        _raise_http(e)

    return ApiResponse(
        success=True,
        message="求解完成",
        data={
            "method": str(report.method),
            "strategy": _strategy_info(report.best).model_dump(),
            "r_overall": metrics.r_overall,
            "s_overall": metrics.s_overall,
            "p_overall": metrics.p_overall,
            "evaluated": report.evaluated,
            "iterations": report.iterations,
            "elapsed": report.elapsed,
            "config_hash": service.loaded.hash,
        }
    )


@router.post("/api/infer", response_model=ApiResponse)
def infer_strategy(request: InferRequest):
    """MTL 在线推理"""
    if service is None:
        raise HTTPException(status_code=500, detail="服务未初始化")
    if service.model is None:
        raise HTTPException(status_code=503, detail="模型未加载")

    scenario = service.loaded.scenario
    try:
        strategy = infer(service.model, np.asarray(request.features), scenario.radio, scenario.power)
    except RisError as e:
        _raise_http(e)

    return ApiResponse(
        success=True,
        message="推理完成",
        data={"strategy": _strategy_info(strategy).model_dump()}
    )


@router.get("/api/model", response_model=ApiResponse)
async def model_info():
    """当前加载模型的结构清单"""
    if service is None or service.model is None:
        raise HTTPException(status_code=503, detail="模型未加载")

    return ApiResponse(
        success=True,
        message="ok",
        data={"path": service.model_path, "manifest": model_manifest(service.model)}
    )
