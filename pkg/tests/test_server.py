"""
API 服务测试
"""

import inspect

import numpy as np
import pytest
import yaml
from fastapi.testclient import TestClient

from src.config import scenario_from_data
from src.mtl.features import feature_size
from src.mtl.model_io import save_model
from src.mtl.network import MtlModel
from src.optimizer.exhaustive import solve_exhaustive
from src.server import endpoints
from src.server.main import create_app
from conftest import random_realization, small_scenario_data


def channel_payload(realization):
    def pairs(values):
        return np.stack([values.real, values.imag], axis=-1).tolist()
    return {
        "direct": pairs(realization.direct),
        "uav_to_ris": pairs(realization.uav_to_ris),
        "ris_to_user": pairs(realization.ris_to_user),
    }


@pytest.fixture
def scenario_file(tmp_path):
    def _write(**sections):
        path = tmp_path / "scenario.yaml"
        path.write_text(yaml.safe_dump({"scenario": small_scenario_data(**sections)}), encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def client(tmp_path, scenario_file):
    app = create_app(scenario_path=scenario_file(), model_path=str(tmp_path / "absent.bin"))
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture
def client_with_model(tmp_path, scenario_file):
    radio = scenario_from_data(small_scenario_data()).scenario.radio
    path = save_model(MtlModel(feature_size(radio), radio.num_pairs, [8]), str(tmp_path / "mtl_k2.bin"))
    app = create_app(scenario_path=scenario_file(), model_path=str(path))
    with TestClient(app) as test_client:
        yield test_client


class TestHealth:
    def test_without_model(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "model_loaded": False}

    def test_root(self, client):
        assert client.get("/").json()["service"] == "ris-uav-optimizer"


class TestSolve:
    def test_sampled_channels(self, client):
        response = client.post("/api/solve", json={"method": "exhaustive", "frame_index": 1})
        assert response.status_code == 200
        data = response.json()["data"]
        assert data["method"] == "exhaustive"
        assert len(data["strategy"]["occupation"]) == 2
        assert data["s_overall"] == pytest.approx(0.9 * data["r_overall"])

    def test_supplied_channels(self, client):
        rng = np.random.default_rng(3)
        realization = random_realization(rng, 2, 4)
        response = client.post("/api/solve", json={"method": "exhaustive", "channels": channel_payload(realization)})
        assert response.status_code == 200

        scenario = scenario_from_data(small_scenario_data()).scenario
        expected = solve_exhaustive(realization, scenario.radio, scenario.power)
        assert response.json()["data"]["r_overall"] == pytest.approx(expected.objective, rel=1e-9)

    def test_channel_shape_mismatch(self, client):
        rng = np.random.default_rng(3)
        realization = random_realization(rng, 2, 8)
        response = client.post("/api/solve", json={"channels": channel_payload(realization)})
        assert response.status_code == 422

    def test_mtl_routed_elsewhere(self, client):
        assert client.post("/api/solve", json={"method": "mtl"}).status_code == 422

    def test_unknown_method(self, client):
        assert client.post("/api/solve", json={"method": "sbb"}).status_code == 422

    def test_infeasible(self, tmp_path, scenario_file):
        app = create_app(scenario_path=scenario_file(power={"max_total_w": 0.01}), model_path=str(tmp_path / "absent.bin"))
        with TestClient(app) as test_client:
            response = test_client.post("/api/solve", json={"method": "exhaustive"})
        assert response.status_code == 409


class TestInfer:
    def test_no_model(self, client):
        assert client.post("/api/infer", json={"features": [0.0] * 22}).status_code == 503
        assert client.get("/api/model").status_code == 503

    def test_with_model(self, client_with_model):
        assert client_with_model.get("/health").json()["model_loaded"] is True

        response = client_with_model.post("/api/infer", json={"features": [0.0] * 22})
        assert response.status_code == 200
        strategy = response.json()["data"]["strategy"]
        assert len(strategy["occupation"]) == 2
        assert strategy["group_count"] == sum(1 for u in strategy["occupation"] if u)

    def test_wrong_feature_size(self, client_with_model):
        assert client_with_model.post("/api/infer", json={"features": [0.0] * 5}).status_code == 422

    def test_manifest(self, client_with_model):
        manifest = client_with_model.get("/api/model").json()["data"]["manifest"]
        assert manifest["hidden_sizes"] == [8]
        assert manifest["num_pairs"] == 2


class TestAppFactory:
    def test_paths_from_environment(self, tmp_path, monkeypatch):
        data = {**small_scenario_data(), "seed": 11}
        path = tmp_path / "seeded.yaml"
        path.write_text(yaml.safe_dump({"scenario": data}), encoding="utf-8")
        app_config = tmp_path / "app.yaml"
        app_config.write_text(yaml.safe_dump({"app": {"mtl": {"model_path": str(tmp_path / "absent.bin")}}}),
                              encoding="utf-8")
        monkeypatch.setenv("RIS_SCENARIO", str(path))
        monkeypatch.setenv("RIS_APP_CONFIG", str(app_config))
        monkeypatch.delenv("RIS_MODEL_PATH", raising=False)

        with TestClient(create_app()) as test_client:
            assert test_client.get("/health").json()["model_loaded"] is False
            response = test_client.post("/api/solve", json={"method": "none"}).json()["data"]
        assert response["config_hash"] == scenario_from_data(data).hash

    def test_cpu_bound_endpoints_are_sync(self):
        assert not inspect.iscoroutinefunction(endpoints.solve)
        assert not inspect.iscoroutinefunction(endpoints.infer_strategy)
