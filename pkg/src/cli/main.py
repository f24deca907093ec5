"""
命令行入口
子命令：simulate / sweep / mtl {dataset,train,eval,bench} / validate-config / serve
"""

import argparse
import os
from typing import Optional

from dotenv import load_dotenv
from loguru import logger

from src import __version__
from src.cli import commands
from src.errors import EXIT_RUNTIME, ConfigError, RisError
from src.simulator.protocol import SOLVER_NAMES
from src.utils import load_config, setup_logger


APP_CONFIG = "config/app.yaml"


def _add_common(parser: argparse.ArgumentParser, app: dict) -> None:
    """所有子命令共用的参数"""
    output = app.get("output", {})
    parser.add_argument("--scenario", default=None,
                        help="场景文件（默认 RIS_SCENARIO 或 config/scenario.yaml）")
    parser.add_argument("--seed", type=int, default=None, help="覆盖场景种子")
    parser.add_argument("--out", default=output.get("dir", "data/output"), help="输出目录")
    parser.add_argument("--format", choices=["csv", "json"], default=output.get("format", "csv"),
                        help="结果表格式")
    parser.add_argument("--workers", type=int, default=None, help="并行线程数")
    parser.add_argument("--log-level", default=None, help="日志级别（覆盖 app.yaml）")


def build_parser(app: Optional[dict] = None) -> argparse.ArgumentParser:
    """构造参数解析器

    Args:
        app: app.yaml 中 app 节点，用于默认值

    Returns:
        ArgumentParser
    """
    app = app or {}
    parser = argparse.ArgumentParser(
        prog="ris-uav",
        description="RIS 辅助多对 UAV 下行链路仿真与优化",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  ris-uav validate-config --scenario config/scenario.yaml
  ris-uav simulate --solver exhaustive --seed 1 --out data/output
  ris-uav sweep --axis groups --values 1,2,4,8
  ris-uav mtl dataset --size 1000
  ris-uav mtl train
  ris-uav mtl eval --axis pairs --values 2,5,8 --size 1000
  ris-uav mtl bench --values 2,4,8
  ris-uav serve --scenario config/scenario.yaml --port 8093
        """
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--app-config", default=APP_CONFIG, help="应用配置文件")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="多帧仿真")
    _add_common(simulate, app)
    simulate.add_argument("--solver", choices=SOLVER_NAMES, default="exhaustive", help="求解器")
    simulate.add_argument("--model", default=None, help="MTL 模型文件")
    simulate.set_defaults(handler=commands.cmd_simulate)

    sweep = subparsers.add_parser("sweep", help="参数扫描")
    _add_common(sweep, app)
    sweep.add_argument("--axis", choices=["groups", "pairs", "distance"], required=True, help="扫描变量")
    sweep.add_argument("--values", default=None, help="逗号分隔的取值")
    sweep.add_argument("--solver", choices=SOLVER_NAMES, default="alternating", help="distance 扫描的求解器")
    sweep.add_argument("--model", default=None, help="MTL 模型文件")
    sweep.add_argument("--levels", default=None, help="distance 扫描中对比的组数 L（逗号分隔，默认全部可取值）")
    sweep.set_defaults(handler=commands.cmd_sweep)

    mtl = subparsers.add_parser("mtl", help="多任务学习代理模型")
    mtl.add_argument("phase", choices=["dataset", "train", "eval", "bench"], help="阶段")
    _add_common(mtl, app)
    mtl.add_argument("--size", type=int, default=None, help="数据集样本数")
    mtl.add_argument("--dataset", default=None, help="数据集 CSV 路径")
    mtl.add_argument("--model", default=None, help="模型文件路径")
    mtl.add_argument("--axis", choices=["fraction", "pairs"], default="fraction",
                     help="eval 的横轴：训练集比例或用户对数 K")
    mtl.add_argument("--values", default=None, help="eval: 训练比例或 K 取值；bench: K 取值（逗号分隔）")
    mtl.add_argument("--repeats", type=int, default=3, help="eval 种子数 / bench 计时重复次数")
    mtl.set_defaults(handler=commands.cmd_mtl)

    validate = subparsers.add_parser("validate-config", help="校验场景文件并输出完整配置")
    _add_common(validate, app)
    validate.set_defaults(handler=commands.cmd_validate_config)

    serve = subparsers.add_parser("serve", help="启动 API 服务")
    serve.add_argument("--scenario", default=None, help="场景文件（默认 RIS_SCENARIO 或 config/scenario.yaml）")
    serve.add_argument("--model", default=None, help="MTL 模型文件（默认 RIS_MODEL_PATH）")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--log-level", default=None, help="日志级别（覆盖 app.yaml）")
    serve.set_defaults(handler=commands.cmd_serve)

    return parser


def _app_section(path: str) -> dict:
    try:
        return load_config(path).get("app", {}) or {}
    except FileNotFoundError:
        return {}


def main(argv: Optional[list[str]] = None) -> int:
    """命令行主函数

    Returns:
        退出码：0 成功，2 配置错误，3 无可行解，4 运行错误
    """
    load_dotenv()
    pre_parser = argparse.ArgumentParser(add_help=False)
    pre_parser.add_argument("--app-config", default=APP_CONFIG)
    known, _ = pre_parser.parse_known_args(argv)
    app = _app_section(known.app_config)

    args = build_parser(app).parse_args(argv)

    log_config = app.get("logging", {})
    level = args.log_level or os.getenv("RIS_LOG_LEVEL") or log_config.get("level", "INFO")
    setup_logger(
        log_dir=log_config.get("dir", "logs"),
        level=level.upper(),
        file_sink=log_config.get("file", True)
    )

    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return e.exit_code
    except RisError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"运行错误: {e}")
        return EXIT_RUNTIME
