"""
FastAPI 服务器
RIS 控制器侧的在线服务：按场景求解传输策略，或用已训练的 MTL 模型快速推理
"""

import os
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from loguru import logger

from src import __version__
from src.config import LoadedScenario, load_scenario
from src.mtl.model_io import load_model
from src.mtl.network import MtlModel
from src.server.endpoints import router, set_service
from src.utils import load_config, setup_logger

# 加载 .env 文件
load_dotenv()


@dataclass
class Service:
    """服务状态"""
    loaded: LoadedScenario
    model: Optional[MtlModel] = None
    model_path: str = ""


def _app_config(path: str) -> dict:
    try:
        return load_config(path).get("app", {}) or {}
    except FileNotFoundError:
        return {}


def create_app(
    app_config: Optional[str] = None,
    scenario_path: Optional[str] = None,
    model_path: Optional[str] = None
) -> FastAPI:
    """创建应用

    Args:
        app_config: 应用配置文件，None 时取 RIS_APP_CONFIG 或 config/app.yaml
        scenario_path: 场景文件，None 时取 RIS_SCENARIO 或默认路径
        model_path: 模型文件，None 时取 RIS_MODEL_PATH 或 app.mtl.model_path

    Returns:
        FastAPI 应用
    """
    config = _app_config(app_config or os.getenv("RIS_APP_CONFIG", "config/app.yaml"))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        """应用生命周期管理"""
        logger.info("初始化求解服务...")

        loaded = load_scenario(scenario_path)
        path = model_path or os.getenv("RIS_MODEL_PATH") or config.get("mtl", {}).get("model_path", "")
        model = None
        if path and Path(path).exists():
            model = load_model(path)
            logger.info(f"已加载 MTL 模型: {path}")
        else:
            logger.warning(f"MTL 模型不存在，/api/infer 不可用: {path}")

        service = Service(loaded=loaded, model=model, model_path=path)
        set_service(service)
        app.state.service = service

        logger.info(f"求解服务初始化完成: K={loaded.scenario.radio.num_pairs}, hash={loaded.hash}")

        yield

        # 关闭时清理
        logger.info("清理资源...")
        set_service(None)

    app = FastAPI(
        title="ris-uav-optimizer",
        version=__version__,
        lifespan=lifespan
    )

    # CORS 中间件
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # 注册路由
    app.include_router(router)

    @app.get("/")
    async def root():
        """根路径"""
        return {
            "service": "ris-uav-optimizer",
            "version": __version__,
            "docs": "/docs",
            "health": "/health"
        }

    return app


app = create_app()


if __name__ == "__main__":
    import uvicorn

    config = _app_config(os.getenv("RIS_APP_CONFIG", "config/app.yaml"))
    log_config = config.get("logging", {})
    setup_logger(
        log_dir=log_config.get("dir", "logs"),
        level=log_config.get("level", "INFO"),
        file_sink=log_config.get("file", True)
    )
    server_config = config.get("server", {})

    uvicorn.run(
        "src.server.main:app",
        host=server_config.get("host", "0.0.0.0"),
        port=server_config.get("port", 8093),
        log_level="info"
    )
