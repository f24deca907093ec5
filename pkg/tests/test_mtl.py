"""
多任务学习测试：网络、损失、训练、推理、模型文件与数据集
"""

import dataclasses

import numpy as np
import pytest

from src.cli.experiments import mtl_bench
from src.config import scenario_from_data
from src.errors import DomainError, ModelFormatError, TrainingDivergedError
from src.models import MtlConfig, PowerConfig, RadioConfig, Sample
from src.mtl.dataset import (
    collect_dataset,
    load_dataset,
    sample_instance,
    save_dataset,
    split_dataset,
    to_arrays,
)
from src.mtl.features import extract_features, feature_size, group_starts
from src.mtl.inference import infer, project_allocation
from src.mtl.model_io import HEADER, MAGIC, load_model, read_manifest, save_model
from src.mtl.network import (
    MtlModel,
    loss_classification,
    loss_regression,
    loss_total,
    one_hot_assist,
    sigmoid,
    softmax,
)
from src.mtl.trainer import evaluate, train
from src.optimizer.exhaustive import solve_exhaustive
from src.optimizer.phases import TWO_PI
from src.simulator.protocol import run_episode
from src.simulator.system import validate_strategy


def synthetic_samples(rng, count, input_size=6, num_pairs=2):
    """标签可由特征学到：前 K 维的符号决定是否接入，后 K 维决定相位"""
    samples = []
    for _ in range(count):
        features = rng.normal(size=input_size)
        decision = (features[:num_pairs] > 0).astype(int)
        phase = 0.1 + 0.8 * sigmoid(features[num_pairs:2 * num_pairs])
        samples.append(Sample(
            features=features,
            class_label=decision,
            reg_label=np.where(decision == 1, phase, 0.0),
        ))
    return samples


class TestActivations:
    def test_softmax_uniform(self):
        np.testing.assert_allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_softmax_large_logits(self):
        probs = softmax(np.array([1000.0, 0.0]))
        assert np.all(np.isfinite(probs))
        np.testing.assert_allclose(probs, [1.0, 0.0], atol=1e-12)

    def test_sigmoid(self):
        assert sigmoid(np.array(0.0)) == 0.5
        values = sigmoid(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(values))
        np.testing.assert_allclose(values, [0.0, 1.0], atol=1e-12)

    def test_one_hot(self):
        np.testing.assert_array_equal(one_hot_assist(np.array([[1, 0]])), [[[0, 1], [1, 0]]])


class TestLosses:
    def test_perfect_prediction(self):
        labels = one_hot_assist(np.array([[1, 0, 1]]))
        assert loss_classification(labels, labels) == pytest.approx(0.0)

    def test_uniform_prediction(self):
        labels = one_hot_assist(np.array([[1, 0]]))
        assert loss_classification(np.full((1, 2, 2), 0.5), labels) == pytest.approx(np.log(2))

    def test_cross_entropy_non_negative(self, rng):
        probs = softmax(rng.normal(size=(5, 3, 2)))
        labels = one_hot_assist(rng.integers(0, 2, (5, 3)))
        assert loss_classification(probs, labels) >= 0

    def test_regression_offset(self):
        labels = np.array([[0.2, 0.4]])
        assert loss_regression(labels, labels) == 0.0
        assert loss_regression(labels + 0.1, labels) == pytest.approx(0.01)

    def test_regression_mask(self):
        value = loss_regression(np.array([[0.5, 0.9]]), np.array([[0.3, 0.0]]), mask=np.array([[1, 0]]))
        assert value == pytest.approx(0.04)

    def test_circular_distance(self):
        value = loss_regression(np.array([0.95]), np.array([0.05]), circular=True)
        assert value == pytest.approx(0.01)

    def test_weighted_total(self):
        assert loss_total(2.0, 4.0, 0.25, 0.5) == pytest.approx(2.5)
        with pytest.raises(DomainError):
            loss_total(1.0, 1.0, -0.1, 0.5)


def random_network(seed, circular):
    """随机小网络：主干偏置非零，隐藏层预激活远离 ReLU 折点，环形残差远离 ±0.5"""
    rng = np.random.default_rng(seed)
    input_size = int(rng.integers(2, 6))
    num_pairs = int(rng.integers(1, 4))
    hidden = [int(h) for h in rng.integers(2, 6, size=int(rng.integers(1, 3)))]
    model = MtlModel(
        input_size, num_pairs, hidden,
        loss_weights=(float(rng.uniform(0.2, 1.0)), float(rng.uniform(0.2, 1.0))),
        circular_loss=circular, seed=seed,
    )
    while True:
        for i in range(model.depth):
            model.params[f"trunk_b{i}"] = rng.uniform(-0.5, 0.5, hidden[i])
        features = rng.normal(size=(6, input_size))
        class_labels = rng.integers(0, 2, (6, num_pairs))
        reg_labels = rng.uniform(0.0, 1.0, (6, num_pairs)) * class_labels

        x, margin = features, np.inf
        for i in range(model.depth):
            z = x @ model.params[f"trunk_w{i}"] + model.params[f"trunk_b{i}"]
            margin = min(margin, float(np.min(np.abs(z))))
            x = np.maximum(z, 0.0)
        if circular:
            diff = model.forward(features)[1] - reg_labels
            wrapped = np.abs(diff - np.round(diff))
            margin = min(margin, float(np.min(np.abs(wrapped - 0.5))))
        if margin > 1e-3:
            return model, features, class_labels, reg_labels


class TestGradients:
    @pytest.mark.parametrize("circular", [False, True])
    @pytest.mark.parametrize("seed", range(20))
    def test_central_differences(self, seed, circular):
        model, features, class_labels, reg_labels = random_network(seed, circular)

        _, grads = model.gradients(features, class_labels, reg_labels)
        eps = 1e-6
        for name, param in model.params.items():
            numeric = np.zeros_like(param)
            for index in np.ndindex(param.shape):
                original = param[index]
                param[index] = original + eps
                plus = model.losses(features, class_labels, reg_labels)[0]
                param[index] = original - eps
                minus = model.losses(features, class_labels, reg_labels)[0]
                param[index] = original
                numeric[index] = (plus - minus) / (2 * eps)
            scale = np.linalg.norm(numeric) + np.linalg.norm(grads[name])
            if scale > 0:
                assert np.linalg.norm(numeric - grads[name]) / scale < 1e-4, name

    def test_zero_regression_weight(self, rng):
        model = MtlModel(5, 2, [4], loss_weights=(1.0, 0.0))
        _, grads = model.gradients(rng.normal(size=(4, 5)), np.ones((4, 2), dtype=int), np.full((4, 2), 0.3))
        assert np.all(grads["reg_w"] == 0)
        assert np.all(grads["reg_b"] == 0)

    def test_unmasked_pairs_ignored(self, rng):
        model = MtlModel(5, 2, [4], loss_weights=(0.0, 1.0))
        features = rng.normal(size=(3, 5))
        class_labels = np.array([[1, 0], [1, 0], [1, 0]])
        _, first = model.gradients(features, class_labels, np.array([[0.2, 0.0]] * 3))
        _, second = model.gradients(features, class_labels, np.array([[0.2, 0.9]] * 3))
        np.testing.assert_array_equal(first["reg_w"], second["reg_w"])

    def test_input_size_checked(self):
        with pytest.raises(DomainError):
            MtlModel(5, 2, [4]).predict(np.zeros(4))


class TestTraining:
    def test_overfits_small_set(self):
        rng = np.random.default_rng(5)
        samples = synthetic_samples(rng, 10)
        config = MtlConfig(
            hidden_sizes=[32], optimizer="adam", learning_rate=1e-2, batch_size=16,
            epochs=500, patience=0, val_fraction=0.0
        )
        model, report = train(samples, config, num_elements=4, max_groups=2)
        assert report.epochs_run == 500
        assert not report.stopped_early
        assert report.epoch_losses[-1][0] < report.epoch_losses[0][0]
        assert report.final_accuracy >= 0.9
        assert report.final_mse < 0.02
        assert model.meta == {"num_elements": 4, "max_groups": 2}

    def test_momentum_sgd_reduces_loss(self):
        rng = np.random.default_rng(6)
        samples = synthetic_samples(rng, 40)
        config = MtlConfig(hidden_sizes=[16], learning_rate=5e-2, batch_size=8, epochs=30, patience=0, val_fraction=0.0)
        _, report = train(samples, config, num_elements=4, max_groups=2)
        assert report.epoch_losses[-1][0] < report.epoch_losses[0][0]

    def test_divergence_detected(self, rng):
        config = MtlConfig(hidden_sizes=[4], learning_rate=np.inf, epochs=3, val_fraction=0.0)
        with pytest.raises(TrainingDivergedError) as info:
            train(synthetic_samples(rng, 8), config, num_elements=4, max_groups=2)
        assert info.value.last_finite_epoch == -1

    def test_early_stopping(self, rng):
        # 学习率为 0，验证损失不再下降
        config = MtlConfig(hidden_sizes=[8], learning_rate=0.0, epochs=100, patience=2, val_fraction=0.25)
        _, report = train(synthetic_samples(rng, 20), config, num_elements=4, max_groups=2)
        assert report.stopped_early
        assert report.epochs_run == 3

    def test_empty_training_set(self):
        with pytest.raises(DomainError):
            train([], MtlConfig(), num_elements=4, max_groups=2)


class TestProjection:
    @pytest.mark.parametrize("probs, num_elements, max_groups, expected", [
        ([0.9, 0.8, 0.2, 0.1], 4, 4, [1, 1, 0, 0]),
        ([0.9, 0.8, 0.7, 0.1], 4, 4, [1, 1, 0, 0]),
        ([0.1, 0.2, 0.3, 0.4], 4, 4, [0, 0, 0, 0]),
        ([0.6, 0.6, 0.6, 0.6], 4, 2, [1, 1, 0, 0]),
        ([0.2, 0.7, 0.9, 0.8], 8, 1, [0, 0, 1, 0]),
        ([0.9, 0.8, 0.7, 0.6], 6, 4, [1, 1, 1, 0]),
    ])
    def test_cases(self, probs, num_elements, max_groups, expected):
        decision = project_allocation(np.array(probs), num_elements, max_groups)
        assert decision.tolist() == expected

    def test_inference_always_feasible(self, rng):
        radio = RadioConfig(num_pairs=4, num_elements=8, max_groups=4)
        power = PowerConfig()
        for seed in range(30):
            model = MtlModel(7, 4, [8], seed=seed)
            strategy = infer(model, rng.normal(size=7) * 5, radio, power)
            validate_strategy(strategy, radio, power)

    def test_power_budget_shrinks_groups(self):
        radio = RadioConfig(num_pairs=2, num_elements=4, max_groups=2)
        # 只够全直射
        power = PowerConfig(max_total_w=1.13)
        model = MtlModel(3, 2, [4])
        model.params["cls_b"] = np.array([-10.0, 10.0, -10.0, 10.0])
        strategy = infer(model, np.zeros(3), radio, power)
        assert strategy.group_count == 0
        validate_strategy(strategy, radio, power)

    def test_pair_count_mismatch(self):
        with pytest.raises(DomainError):
            infer(MtlModel(3, 2, [4]), np.zeros(3), RadioConfig(num_pairs=3, num_elements=4))


class TestModelFile:
    def test_round_trip(self, tmp_path, rng):
        model = MtlModel(6, 2, [8, 4], loss_weights=(0.3, 0.7), seed=9)
        model.fit_normalizer(rng.normal(size=(20, 6)))
        model.meta = {"num_elements": 4, "max_groups": 2}
        path = save_model(model, str(tmp_path / "model.bin"))

        loaded = load_model(str(path))
        features = rng.normal(size=(5, 6))
        for before, after in zip(model.predict(features), loaded.predict(features)):
            np.testing.assert_array_equal(before, after)
        assert loaded.loss_weights == (0.3, 0.7)
        assert loaded.meta == model.meta

    def test_manifest(self, tmp_path):
        path = save_model(MtlModel(6, 2, [8]), str(tmp_path / "model.bin"))
        manifest, _ = read_manifest(str(path))
        assert manifest["hidden_sizes"] == [8]
        assert [t["name"] for t in manifest["tensors"]][-2:] == ["feature_mean", "feature_std"]

    def test_version_mismatch(self, tmp_path):
        path = save_model(MtlModel(6, 2, [8]), str(tmp_path / "model.bin"))
        data = bytearray(path.read_bytes())
        version, length = HEADER.unpack_from(data, len(MAGIC))
        HEADER.pack_into(data, len(MAGIC), version + 1, length)
        path.write_bytes(bytes(data))
        with pytest.raises(ModelFormatError):
            load_model(str(path))

    @pytest.mark.parametrize("mutate", [
        lambda data: b"NOTMODEL" + data[8:],
        lambda data: data[:-8],
        lambda data: data + b"\0" * 8,
    ])
    def test_corrupted(self, tmp_path, mutate):
        path = save_model(MtlModel(6, 2, [8]), str(tmp_path / "model.bin"))
        path.write_bytes(mutate(path.read_bytes()))
        with pytest.raises(ModelFormatError):
            load_model(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(str(tmp_path / "absent.bin"))


class TestFeatures:
    def test_group_starts(self):
        assert group_starts(RadioConfig(num_pairs=2, num_elements=4, max_groups=2)) == [0, 2]
        assert group_starts(RadioConfig(num_pairs=4, num_elements=8, max_groups=4)) == [0, 2, 4, 6]

    def test_size(self, small_loaded):
        scenario = small_loaded.scenario
        geometry, realization = sample_instance(scenario, 0)
        features = extract_features(realization, geometry, scenario.radio, scenario.placement_area)
        assert feature_size(scenario.radio) == 22
        assert features.shape == (22,)
        assert np.all(np.isfinite(features))


class TestDataset:
    def test_labels_reproduce_solver(self, small_loaded):
        scenario = small_loaded.scenario
        samples = collect_dataset(scenario, 5)
        assert len(samples) == 5
        for index, sample in enumerate(samples):
            _, realization = sample_instance(scenario, index)
            report = solve_exhaustive(realization, scenario.radio, scenario.power, scenario.optimizer)
            np.testing.assert_array_equal(sample.class_label, report.best.decision)
            for k in np.flatnonzero(sample.class_label):
                assert sample.reg_label[k] * TWO_PI == pytest.approx(report.best.phases[k][0])

    def test_parallel_collection_matches(self, small_loaded):
        serial = collect_dataset(small_loaded.scenario, 4)
        parallel = collect_dataset(small_loaded.scenario, 4, workers=2)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.features, b.features)

    def test_csv_round_trip(self, tmp_path, small_loaded):
        samples = collect_dataset(small_loaded.scenario, 4)
        path = save_dataset(samples, str(tmp_path / "dataset.csv"))
        loaded = load_dataset(str(path))
        for before, after in zip(to_arrays(samples), to_arrays(loaded)):
            np.testing.assert_array_equal(before, after)

    def test_empty_dataset(self, tmp_path, small_loaded):
        assert collect_dataset(small_loaded.scenario, 0) == []
        path = save_dataset([], str(tmp_path / "empty.csv"), num_features=22, num_pairs=2)
        header = path.read_text(encoding="utf-8").strip().splitlines()
        assert len(header) == 1
        assert header[0].split(",")[-1] == "reg_1"
        assert load_dataset(str(path)) == []

    def test_negative_size(self, small_loaded):
        with pytest.raises(DomainError):
            collect_dataset(small_loaded.scenario, -1)

    def test_split(self, rng):
        train_set, test_set = split_dataset(synthetic_samples(rng, 10), 0.7, seed=1)
        assert (len(train_set), len(test_set)) == (7, 3)
        with pytest.raises(DomainError):
            split_dataset([], 0.0)


@pytest.mark.slow
def test_mtl_episode_feasible_and_bounded(small_loaded):
    scenario = small_loaded.scenario
    samples = collect_dataset(scenario, 30)
    model, _ = train(samples, scenario.mtl, scenario.radio.num_elements, scenario.radio.max_groups)

    learned = run_episode(scenario, "mtl", model).traces
    reference = run_episode(scenario, "exhaustive").traces
    for ours, best in zip(learned, reference):
        validate_strategy(ours.strategy, scenario.radio, scenario.power)
        assert ours.metrics.r_overall <= best.metrics.r_overall * (1 + 1e-12)

    accuracy, mse = evaluate(model, samples, scenario.radio.num_elements, scenario.radio.max_groups)
    assert 0.0 <= accuracy <= 1.0
    assert mse >= 0.0


@pytest.mark.slow
def test_accuracy_grows_with_training_fraction():
    scenario = scenario_from_data({}, {"radio": {"num_pairs": 2}}).scenario
    radio = scenario.radio
    samples = collect_dataset(scenario, 5000, workers=4)

    scores = {}
    for fraction in (0.1, 0.9):
        runs = []
        for seed in range(3):
            train_set, test_set = split_dataset(samples, fraction, seed)
            config = dataclasses.replace(scenario.mtl, seed=seed)
            model, _ = train(train_set, config, radio.num_elements, radio.max_groups)
            runs.append(evaluate(model, test_set, radio.num_elements, radio.max_groups))
        scores[fraction] = np.mean(runs, axis=0)

    accuracy_high, mse_high = scores[0.9]
    accuracy_low, mse_low = scores[0.1]
    assert accuracy_high >= 0.9
    assert accuracy_high > accuracy_low
    assert mse_high < mse_low


@pytest.mark.slow
def test_inference_two_orders_faster_than_exhaustive():
    rows = mtl_bench({}, [8], repeats=5)
    timings = {row["metric"]: row["value"] for row in rows}
    assert timings["mtl_s"] <= 0.01 * timings["exhaustive_s"]
