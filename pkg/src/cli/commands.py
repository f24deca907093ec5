"""
子命令实现
每个 cmd_* 接收解析后的参数，返回退出码；异常由 src.cli.main 统一映射
"""

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from loguru import logger

from src.cli import experiments
from src.cli.writers import ResultTable, trace_table, write_aggregate, write_table
from src.config import LoadedScenario, deep_update, load_scenario, load_scenario_data, scenario_from_data
from src.errors import EXIT_OK, ConfigError
from src.models import SolveMethod
from src.mtl.dataset import collect_dataset, load_dataset, save_dataset
from src.mtl.features import feature_size
from src.mtl.model_io import load_model, save_model
from src.mtl.network import MtlModel
from src.mtl.trainer import train
from src.simulator.protocol import run_episode
from src.utils import load_config, save_json


DEFAULT_GROUP_VALUES = [1, 2, 4, 8]
DEFAULT_PAIR_VALUES = [2, 4, 6, 8]
DEFAULT_DISTANCE_VALUES = [0, 50, 100, 150, 200, 250]
DEFAULT_FRACTIONS = [0.1, 0.3, 0.5, 0.7, 0.9]
DEFAULT_EVAL_PAIR_VALUES = [2, 5, 8]
DEFAULT_BENCH_VALUES = [2, 3, 4, 5, 6, 7, 8]
SWEEP_SCHEMES = [SolveMethod.NO_RIS, SolveMethod.RANDOM_PHASE, SolveMethod.ALTERNATING, SolveMethod.MTL]


def _overrides(args: argparse.Namespace) -> dict:
    """命令行覆盖项"""
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["optimizer"] = {"workers": args.workers}
    return overrides


def _scenario_data(args: argparse.Namespace) -> dict:
    """场景原始数据叠加命令行覆盖项（扫描时按点再叠加扫描变量）"""
    return deep_update(load_scenario_data(args.scenario), _overrides(args))


def _load(args: argparse.Namespace) -> LoadedScenario:
    return load_scenario(args.scenario, _overrides(args))


def _parse_values(raw: Optional[str], default: list, cast=float) -> list:
    if not raw:
        return list(default)
    try:
        return [cast(v) for v in raw.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"无法解析取值列表: {raw}", "--values") from e


def _model_path(loaded: LoadedScenario, explicit: Optional[str], num_pairs: Optional[int] = None) -> str:
    """模型路径：--model > RIS_MODEL_PATH > mtl.model_path 模板"""
    if explicit:
        return explicit
    load_dotenv()
    env_path = os.getenv("RIS_MODEL_PATH")
    if env_path and num_pairs is None:
        return env_path
    template = loaded.scenario.mtl.model_path
    return template.format(K=num_pairs or loaded.scenario.radio.num_pairs)


def _try_load_model(path: str) -> Optional[MtlModel]:
    if not Path(path).exists():
        return None
    return load_model(path)


def cmd_simulate(args: argparse.Namespace) -> int:
    """simulate：运行多帧仿真，写出逐帧结果与汇总"""
    loaded = _load(args)
    model = None
    if args.solver == SolveMethod.MTL:
        model = load_model(_model_path(loaded, args.model))

    episode = run_episode(loaded.scenario, args.solver, model)
    seed = loaded.scenario.seed
    write_table(trace_table(episode, seed, loaded.hash), args.out, "simulate_trace", args.format)
    write_aggregate(episode, args.out, "simulate_aggregate", seed, loaded.hash, args.solver)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    """sweep：groups / pairs / distance 扫描"""
    data = _scenario_data(args)
    loaded = scenario_from_data(data)
    workers = args.workers or 1

    if args.axis == "groups":
        rows = experiments.sweep_groups(data, _parse_values(args.values, DEFAULT_GROUP_VALUES, int), workers=workers)
    elif args.axis == "pairs":
        values = _parse_values(args.values, DEFAULT_PAIR_VALUES, int)
        models = {}
        for k in values:
            model = _try_load_model(_model_path(loaded, args.model if len(values) == 1 else None, k))
            if model is not None:
                models[k] = model
        rows = experiments.sweep_pairs(data, values, [str(s) for s in SWEEP_SCHEMES], models, workers)
    else:
        model = None
        if args.solver == SolveMethod.MTL:
            model = load_model(_model_path(loaded, args.model))
        levels = _parse_values(args.levels, [], int) or None
        rows = experiments.sweep_distance(
            data, _parse_values(args.values, DEFAULT_DISTANCE_VALUES), args.solver, model, workers, levels
        )

    table = ResultTable(f"sweep_{args.axis}", loaded.scenario.seed, loaded.hash)
    table.extend(rows)
    write_table(table, args.out, f"sweep_{args.axis}", args.format)
    return EXIT_OK


def cmd_mtl(args: argparse.Namespace) -> int:
    """mtl：dataset / train / eval / bench"""
    data = _scenario_data(args)
    loaded = scenario_from_data(data)
    scenario = loaded.scenario
    num_pairs = scenario.radio.num_pairs
    dataset_path = args.dataset or str(Path(args.out) / f"dataset_k{num_pairs}.csv")

    if args.phase == "dataset":
        size = scenario.mtl.dataset_size if args.size is None else args.size
        samples = collect_dataset(scenario, size, workers=args.workers or 1)
        save_dataset(samples, dataset_path, feature_size(scenario.radio), num_pairs)
        return EXIT_OK

    if args.phase == "train":
        samples = load_dataset(dataset_path)
        model, report = train(samples, scenario.mtl, scenario.radio.num_elements, scenario.radio.max_groups)
        model_path = _model_path(loaded, args.model)
        save_model(model, model_path)
        save_json({
            "config_hash": loaded.hash,
            "seed": scenario.seed,
            "model_path": model_path,
            "epoch_losses": report.epoch_losses,
            "final_accuracy": report.final_accuracy,
            "final_mse": report.final_mse,
            "epochs_run": report.epochs_run,
            "stopped_early": report.stopped_early,
            "wall_clock": report.wall_clock,
        }, str(Path(args.out) / "train_report.json"))
        return EXIT_OK

    table = ResultTable(f"mtl_{args.phase}", scenario.seed, loaded.hash)
    name = f"mtl_{args.phase}"
    if args.phase == "eval":
        seeds = [scenario.mtl.seed + i for i in range(args.repeats)]
        if args.axis == "pairs":
            values = _parse_values(args.values, DEFAULT_EVAL_PAIR_VALUES, int)
            size = scenario.mtl.dataset_size if args.size is None else args.size
            table.extend(experiments.mtl_pairs_eval(data, values, size, seeds, workers=args.workers or 1))
            name = "mtl_eval_pairs"
        else:
            samples = load_dataset(dataset_path)
            fractions = _parse_values(args.values, DEFAULT_FRACTIONS)
            table.extend(experiments.mtl_fraction_eval(loaded, samples, fractions, seeds, args.workers or 1))
    else:
        values = _parse_values(args.values, DEFAULT_BENCH_VALUES, int)
        models = {}
        for k in values:
            model = _try_load_model(_model_path(loaded, None, k))
            if model is not None:
                models[k] = model
        table.extend(experiments.mtl_bench(data, values, max(5, args.repeats), models))

    write_table(table, args.out, name, args.format)
    return EXIT_OK


def cmd_validate_config(args: argparse.Namespace) -> int:
    """validate-config：输出注入默认值后的完整配置与哈希"""
    loaded = _load(args)
    output = {"config_hash": loaded.hash, **loaded.resolved}
    sys.stdout.write(json.dumps(output, indent=2, ensure_ascii=False, sort_keys=True) + "\n")
    logger.info(f"配置有效: {loaded.source} (hash={loaded.hash})")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    """serve：启动在线推理/求解 API

    应用配置、场景与模型路径经环境变量传给 uvicorn 工厂模式下的 create_app
    """
    import uvicorn

    server_config = load_config(args.app_config).get("app", {}).get("server", {})
    host = args.host or server_config.get("host", "0.0.0.0")
    port = args.port or server_config.get("port", 8093)

    os.environ["RIS_APP_CONFIG"] = args.app_config
    if args.scenario:
        os.environ["RIS_SCENARIO"] = args.scenario
    if args.model:
        os.environ["RIS_MODEL_PATH"] = args.model

    logger.info(f"启动 ris-uav-optimizer 服务: http://{host}:{port}")
    uvicorn.run(
        "src.server.main:create_app",
        factory=True,
        host=host,
        port=port,
        log_level="info",
        reload=False
    )
    return EXIT_OK
