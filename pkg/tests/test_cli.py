"""
命令行测试
"""

import json
import os

import pandas as pd
import pytest
import yaml

from src.cli.main import main
from src.cli.writers import RESULT_COLUMNS, read_table
from src.config import scenario_from_data
from conftest import small_scenario_data


@pytest.fixture
def app_config(tmp_path):
    path = tmp_path / "app.yaml"
    path.write_text(yaml.safe_dump({
        "app": {
            "output": {"dir": str(tmp_path / "out"), "format": "csv"},
            "logging": {"level": "WARNING", "file": False},
        }
    }), encoding="utf-8")
    return str(path)


@pytest.fixture
def write_scenario(tmp_path):
    def _write(name="scenario.yaml", **sections):
        data = small_scenario_data(**sections)
        path = tmp_path / name
        path.write_text(yaml.safe_dump({"scenario": data}), encoding="utf-8")
        return str(path), data
    return _write


@pytest.fixture
def run(app_config):
    def _run(*argv):
        return main(["--app-config", app_config, *argv])
    return _run


class TestValidateConfig:
    def test_prints_resolved_config(self, run, write_scenario, capsys):
        path, data = write_scenario()
        assert run("validate-config", "--scenario", path) == 0
        output = json.loads(capsys.readouterr().out)
        assert output["scenario"]["radio"]["num_pairs"] == 2
        assert output["scenario"]["power"]["max_total_w"] == 100.0
        assert output["config_hash"] == scenario_from_data(data).hash

    def test_unknown_key(self, run, write_scenario):
        path, _ = write_scenario(radio={"bogus": 1})
        assert run("validate-config", "--scenario", path) == 2

    def test_missing_file(self, run, tmp_path):
        assert run("validate-config", "--scenario", str(tmp_path / "absent.yaml")) == 2

    def test_seed_override_changes_hash(self, run, write_scenario, capsys):
        path, _ = write_scenario()
        run("validate-config", "--scenario", path)
        first = json.loads(capsys.readouterr().out)["config_hash"]
        run("validate-config", "--scenario", path, "--seed", "99")
        second = json.loads(capsys.readouterr().out)
        assert second["scenario"]["seed"] == 99
        assert second["config_hash"] != first


class TestSimulate:
    def test_reruns_are_byte_identical(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        for name in ("a", "b"):
            assert run("simulate", "--scenario", path, "--out", str(tmp_path / name)) == 0
        for file_name in ("simulate_trace.csv", "simulate_aggregate.json"):
            assert (tmp_path / "a" / file_name).read_bytes() == (tmp_path / "b" / file_name).read_bytes()

    def test_trace_contents(self, run, write_scenario, tmp_path):
        path, data = write_scenario()
        run("simulate", "--scenario", path, "--out", str(tmp_path))
        frame = read_table(str(tmp_path / "simulate_trace.csv"))
        assert list(frame.columns) == RESULT_COLUMNS
        assert sorted(frame["index"].unique().tolist()) == [0, 1, 2]
        assert set(frame["config_hash"]) == {scenario_from_data(data).hash}
        assert {"s_overall", "r_overall", "occupation_pair1", "snr_db_pair0"} <= set(frame["metric"])

        aggregate = json.loads((tmp_path / "simulate_aggregate.json").read_text(encoding="utf-8"))
        assert aggregate["frames"] == 3
        assert aggregate["solver"] == "exhaustive"

    def test_round_trip_is_stable(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        run("simulate", "--scenario", path, "--out", str(tmp_path))
        original = tmp_path / "simulate_trace.csv"
        copy = tmp_path / "copy.csv"
        read_table(str(original)).to_csv(copy, index=False, encoding="utf-8")
        assert copy.read_bytes() == original.read_bytes()

    def test_zero_frames_writes_header_only(self, run, write_scenario, tmp_path):
        path, _ = write_scenario(protocol={"num_frames": 0})
        assert run("simulate", "--scenario", path, "--out", str(tmp_path)) == 0
        text = (tmp_path / "simulate_trace.csv").read_text(encoding="utf-8")
        assert text.strip() == ",".join(RESULT_COLUMNS)

    def test_json_format(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        assert run("simulate", "--scenario", path, "--out", str(tmp_path), "--format", "json") == 0
        rows = json.loads((tmp_path / "simulate_trace.json").read_text(encoding="utf-8"))["rows"]
        assert rows and set(rows[0]) == set(RESULT_COLUMNS)

    def test_infeasible_exit_code(self, run, write_scenario, tmp_path):
        path, _ = write_scenario(power={"max_total_w": 0.01})
        assert run("simulate", "--scenario", path, "--out", str(tmp_path)) == 3

    @pytest.mark.slow
    def test_coupled_solver_time_at_default_frame(self, run, tmp_path):
        path = tmp_path / "coupled.yaml"
        path.write_text(yaml.safe_dump({
            "scenario": {"protocol": {"num_frames": 1, "couple_solver_time": True}}
        }), encoding="utf-8")
        assert run("simulate", "--scenario", str(path), "--out", str(tmp_path)) == 0
        aggregate = json.loads((tmp_path / "simulate_aggregate.json").read_text(encoding="utf-8"))
        assert aggregate["aggregate"]["overrun_frames"] in (0, 1)

    def test_missing_model_is_runtime_error(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        code = run(
            "simulate", "--scenario", path, "--out", str(tmp_path),
            "--solver", "mtl", "--model", str(tmp_path / "absent.bin")
        )
        assert code == 4


class TestSweep:
    def test_groups_snr_falls_with_more_groups(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        assert run("sweep", "--scenario", path, "--out", str(tmp_path), "--axis", "groups", "--values", "1,2") == 0
        frame = read_table(str(tmp_path / "sweep_groups.csv"))
        snr = frame[frame["metric"] == "snr_db_pair0"].pivot(index="index", columns="sweep_value", values="value")
        assert (snr[1.0] >= snr[2.0]).all()
        assert set(frame["sweep_var"]) == {"groups"}

    def test_pairs(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        assert run("sweep", "--scenario", path, "--out", str(tmp_path), "--axis", "pairs", "--values", "2") == 0
        frame = read_table(str(tmp_path / "sweep_pairs.csv"))
        metrics = set(frame["metric"])
        assert {"s_overall.none", "s_overall.random-phase", "s_overall.alternating"} <= metrics
        assert "s_overall.mtl" not in metrics

        per_pair = frame[frame["metric"] == "s_per_pair.none"]["value"].to_numpy()
        total = frame[frame["metric"] == "s_overall.none"]["value"].to_numpy()
        assert per_pair == pytest.approx(total / 2)

    def test_distance(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        code = run(
            "sweep", "--scenario", path, "--out", str(tmp_path),
            "--axis", "distance", "--values", "0,50", "--solver", "none"
        )
        assert code == 0
        frame = read_table(str(tmp_path / "sweep_distance.csv"))
        assert sorted(frame["sweep_value"].unique().tolist()) == [0.0, 50.0]
        assert (frame[frame["metric"] == "group_count"]["value"] == 0).all()

        def pivot(metric):
            rows = frame[frame["metric"] == metric]
            return rows.set_index(["sweep_value", "index"])["value"].sort_index()

        # 前缀分组下第 1 对的组随 L 增大而缩小
        assert (pivot("snr_db_pair0.L1") >= pivot("snr_db_pair0.L2")).all()
        assert (pivot("tx_power_w_pair0.L1") <= pivot("tx_power_w_pair0.L2")).all()

    def test_distance_levels_option(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        code = run(
            "sweep", "--scenario", path, "--out", str(tmp_path),
            "--axis", "distance", "--values", "0", "--solver", "none", "--levels", "2,3"
        )
        assert code == 0
        metrics = set(read_table(str(tmp_path / "sweep_distance.csv"))["metric"])
        assert {"snr_db_pair0.L2", "tx_power_w_pair0.L2"} <= metrics
        assert not any(m.endswith(".L1") or m.endswith(".L3") for m in metrics)

    def test_bad_values(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        assert run("sweep", "--scenario", path, "--out", str(tmp_path), "--axis", "groups", "--values", "a,b") == 2


class TestMtlCommands:
    def test_dataset_size(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        assert run("mtl", "dataset", "--scenario", path, "--out", str(tmp_path), "--size", "10") == 0
        frame = pd.read_csv(tmp_path / "dataset_k2.csv")
        assert len(frame) == 10
        assert [c for c in frame.columns if c.startswith("cls_")] == ["cls_0", "cls_1"]

    def test_bench(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        code = run("mtl", "bench", "--scenario", path, "--out", str(tmp_path), "--values", "2", "--repeats", "1")
        assert code == 0
        frame = read_table(str(tmp_path / "mtl_bench.csv"))
        assert set(frame["metric"]) == {"exhaustive_s", "mtl_s", "speedup"}
        assert (frame["value"] > 0).all()

    def test_eval_over_pair_counts(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        code = run(
            "mtl", "eval", "--scenario", path, "--out", str(tmp_path),
            "--axis", "pairs", "--values", "2,3", "--size", "20", "--repeats", "1"
        )
        assert code == 0
        frame = read_table(str(tmp_path / "mtl_eval_pairs.csv"))
        assert set(frame["sweep_var"]) == {"pairs"}
        assert sorted(frame["sweep_value"].unique().tolist()) == [2.0, 3.0]
        assert set(frame["metric"]) == {"accuracy", "mse"}
        accuracy = frame[frame["metric"] == "accuracy"]["value"]
        assert ((accuracy >= 0) & (accuracy <= 1)).all()

    @pytest.mark.slow
    def test_train_then_simulate(self, run, write_scenario, tmp_path):
        path, _ = write_scenario()
        out = str(tmp_path)
        model = str(tmp_path / "models" / "mtl_k2.bin")
        assert run("mtl", "dataset", "--scenario", path, "--out", out, "--size", "30") == 0
        assert run("mtl", "train", "--scenario", path, "--out", out, "--model", model) == 0

        report = json.loads((tmp_path / "train_report.json").read_text(encoding="utf-8"))
        assert report["epochs_run"] >= 1
        assert report["model_path"] == model

        assert run("simulate", "--scenario", path, "--out", out, "--solver", "mtl", "--model", model) == 0
        aggregate = json.loads((tmp_path / "simulate_aggregate.json").read_text(encoding="utf-8"))
        assert aggregate["solver"] == "mtl"

        code = run("mtl", "eval", "--scenario", path, "--out", out, "--values", "0.5", "--repeats", "1")
        assert code == 0
        frame = read_table(str(tmp_path / "mtl_eval.csv"))
        assert set(frame["metric"]) == {"accuracy", "mse"}


class TestServe:
    def test_settings_reach_app_factory(self, run, app_config, write_scenario, tmp_path, monkeypatch):
        import uvicorn

        calls = []
        monkeypatch.setattr(uvicorn, "run", lambda target, **kwargs: calls.append((target, kwargs)))
        for name in ("RIS_APP_CONFIG", "RIS_SCENARIO", "RIS_MODEL_PATH"):
            monkeypatch.delenv(name, raising=False)
        path, _ = write_scenario()
        model = str(tmp_path / "mtl_k2.bin")

        assert run("serve", "--scenario", path, "--model", model, "--port", "9001") == 0
        target, kwargs = calls[0]
        assert target == "src.server.main:create_app"
        assert kwargs["factory"] is True
        assert kwargs["port"] == 9001
        assert os.environ["RIS_APP_CONFIG"] == app_config
        assert os.environ["RIS_SCENARIO"] == path
        assert os.environ["RIS_MODEL_PATH"] == model
