"""
训练与评估
小批量梯度下降（动量 SGD / Adam）+ 反向传播，验证集早停
"""

import time
from typing import Optional

import numpy as np
from loguru import logger

from src.errors import DomainError, TrainingDivergedError
from src.models import MtlConfig, Sample, TrainReport
from src.mtl.dataset import to_arrays
from src.mtl.inference import project_allocation
from src.mtl.network import MtlModel
from src.utils import format_duration


class MomentumSGD:
    """动量 SGD"""

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            velocity = self.velocity.get(name, np.zeros_like(grad))
            velocity = self.momentum * velocity - self.learning_rate * grad
            self.velocity[name] = velocity
            params[name] += velocity


class Adam:
    """Adam"""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.first: dict[str, np.ndarray] = {}
        self.second: dict[str, np.ndarray] = {}
        self.steps = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.steps += 1
        for name, grad in grads.items():
            m = self.beta1 * self.first.get(name, np.zeros_like(grad)) + (1 - self.beta1) * grad
            v = self.beta2 * self.second.get(name, np.zeros_like(grad)) + (1 - self.beta2) * grad ** 2
            self.first[name], self.second[name] = m, v
            m_hat = m / (1 - self.beta1 ** self.steps)
            v_hat = v / (1 - self.beta2 ** self.steps)
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: MtlConfig):
    if config.optimizer == "sgd":
        return MomentumSGD(config.learning_rate, config.momentum)
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    raise DomainError(f"未知优化器: {config.optimizer}")


def evaluate(
    model: MtlModel,
    samples: list[Sample],
    num_elements: int,
    max_groups: int
) -> tuple[float, float]:
    """评估模型

    Args:
        model: 模型
        samples: 测试样本
        num_elements: N（投影到可行 F 时使用）
        max_groups: L_max

    Returns:
        (分配准确率, 辅助用户对上的回归 MSE)
    """
    if not samples:
        return 0.0, 0.0
    features, class_labels, reg_labels = to_arrays(samples)
    assist_probs, reg = model.predict(features)

    matched = 0
    for i in range(len(samples)):
        decision = project_allocation(assist_probs[i], num_elements, max_groups)
        matched += int(np.array_equal(decision, class_labels[i]))

    mask = class_labels.astype(bool)
    mse = float(np.mean((reg[mask] - reg_labels[mask]) ** 2)) if mask.any() else 0.0
    return matched / len(samples), mse


def train(
    samples: list[Sample],
    config: MtlConfig,
    num_elements: int,
    max_groups: int,
    model: Optional[MtlModel] = None
) -> tuple[MtlModel, TrainReport]:
    """训练多任务模型

    Args:
        samples: 训练样本
        config: 超参数
        num_elements: N
        max_groups: L_max
        model: 继续训练的模型，None 时按 config 新建

    Returns:
        (模型, 训练报告)

    Raises:
        DomainError: 数据集为空
        TrainingDivergedError: 损失出现非有限值
    """
    if not samples:
        raise DomainError("训练集为空")
    start = time.perf_counter()
    features, class_labels, reg_labels = to_arrays(samples)
    num_samples, num_pairs = class_labels.shape

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(num_samples)
    num_val = int(round(config.val_fraction * num_samples))
    if num_val >= num_samples:
        num_val = 0
    val_idx, train_idx = order[:num_val], order[num_val:]

    if model is None:
        model = MtlModel(
            input_size=features.shape[1],
            num_pairs=num_pairs,
            hidden_sizes=config.hidden_sizes,
            loss_weights=config.loss_weights,
            circular_loss=config.circular_loss,
            mask_unassisted=config.mask_unassisted,
            seed=config.seed,
        )
    model.fit_normalizer(features[train_idx])
    optimizer = make_optimizer(config)

    # 没有验证集时以训练损失作为早停依据
    monitor_idx = val_idx if num_val > 0 else train_idx
    best_loss = np.inf
    best_params = model.copy_params()
    since_best = 0
    epoch_losses: list[tuple[float, float, float]] = []
    stopped_early = False
    batch_size = max(1, config.batch_size)

    for epoch in range(config.epochs):
        shuffled = train_idx[rng.permutation(train_idx.size)]
        for offset in range(0, shuffled.size, batch_size):
            batch = shuffled[offset:offset + batch_size]
            _, grads = model.gradients(features[batch], class_labels[batch], reg_labels[batch])
            optimizer.step(model.params, grads)

        losses = model.losses(features[train_idx], class_labels[train_idx], reg_labels[train_idx])
        if not (np.all(np.isfinite(losses)) and model.all_finite()):
            raise TrainingDivergedError(f"epoch {epoch} 损失发散", last_finite_epoch=epoch - 1)
        epoch_losses.append(tuple(float(v) for v in losses))

        monitor = model.losses(features[monitor_idx], class_labels[monitor_idx], reg_labels[monitor_idx])[0]
        if monitor < best_loss:
            best_loss, best_params, since_best = monitor, model.copy_params(), 0
        else:
            since_best += 1

        if epoch % 10 == 0 or epoch == config.epochs - 1:
            logger.debug(
                f"epoch {epoch}: ι={losses[0]:.6f} ι_c={losses[1]:.6f} ι_r={losses[2]:.6f} 监控={monitor:.6f}"
            )
        if config.patience > 0 and since_best >= config.patience:
            stopped_early = True
            logger.info(f"验证损失 {config.patience} 个 epoch 未改善，提前停止于 epoch {epoch}")
            break

    model.load_params(best_params)
    eval_samples = [samples[i] for i in monitor_idx]
    accuracy, mse = evaluate(model, eval_samples, num_elements, max_groups)
    wall_clock = time.perf_counter() - start

    model.meta.update({"num_elements": num_elements, "max_groups": max_groups})
    logger.info(
        f"训练完成: {len(epoch_losses)} epochs, 准确率 {accuracy:.3f}, MSE {mse:.5f}, 用时 {format_duration(wall_clock)}"
    )
    return model, TrainReport(
        epoch_losses=epoch_losses,
        final_accuracy=accuracy,
        final_mse=mse,
        wall_clock=wall_clock,
        epochs_run=len(epoch_losses),
        stopped_early=stopped_early,
    )
