"""
多任务网络
共享全连接主干（ReLU）+ 分类头（每个用户对一个二分类 softmax）+ 回归头（K 个 sigmoid 输出），
numpy 实现前向、反向传播与损失函数
"""

from typing import Optional

import numpy as np

from src.errors import DomainError


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, x)


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """数值稳定的 softmax（减去最大值后取指数）"""
    z = np.asarray(z, dtype=float)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=axis, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """数值稳定的 sigmoid，大幅值输入不溢出"""
    z = np.asarray(z, dtype=float)
    decay = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))


def loss_classification(predictions: np.ndarray, labels: np.ndarray) -> float:
    """交叉熵：对类别求和，对样本与用户对槽位取平均

    Args:
        predictions: 概率 (..., Q)
        labels: one-hot 标签，形状同 predictions

    Returns:
        ι_c ≥ 0
    """
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape:
        raise DomainError(f"预测与标签形状不一致: {predictions.shape} vs {labels.shape}")
    if predictions.size == 0:
        return 0.0

    log_p = np.log(np.clip(predictions, 1e-300, 1.0))
    per_slot = -np.sum(labels * log_p, axis=-1)
    return float(np.mean(per_slot))


def _regression_residual(predictions: np.ndarray, labels: np.ndarray, circular: bool) -> np.ndarray:
    diff = np.asarray(predictions, dtype=float) - np.asarray(labels, dtype=float)
    if circular:
        # 归一化相位在 [0, 1) 上首尾相接
        diff = diff - np.round(diff)
    return diff


def loss_regression(
    predictions: np.ndarray,
    labels: np.ndarray,
    mask: Optional[np.ndarray] = None,
    circular: bool = False
) -> float:
    """均方误差

    Args:
        predictions: 回归输出
        labels: 归一化相位标签
        mask: 只统计 mask=1 的位置（未辅助的用户对不计入）；None 表示全部
        circular: 是否按环形距离计算

    Returns:
        ι_r ≥ 0
    """
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape:
        raise DomainError(f"预测与标签形状不一致: {predictions.shape} vs {labels.shape}")

    squared = _regression_residual(predictions, labels, circular) ** 2
    if mask is None:
        return float(np.mean(squared)) if squared.size else 0.0
    mask = np.asarray(mask, dtype=float)
    count = float(mask.sum())
    return float(np.sum(squared * mask) / count) if count > 0 else 0.0


def loss_total(loss_cls: float, loss_reg: float, weight_cls: float, weight_reg: float) -> float:
    """加权总损失 ι = ξ_c·ι_c + ξ_r·ι_r"""
    if weight_cls < 0 or weight_reg < 0:
        raise DomainError(f"损失权重必须非负: ({weight_cls}, {weight_reg})")
    return weight_cls * loss_cls + weight_reg * loss_reg


def one_hot_assist(decision: np.ndarray) -> np.ndarray:
    """F (M, K) → 二分类 one-hot (M, K, 2)，第 1 类表示接入 RIS"""
    decision = np.asarray(decision, dtype=int)
    encoded = np.zeros(decision.shape + (2,))
    encoded[..., 0] = decision == 0
    encoded[..., 1] = decision == 1
    return encoded


class MtlModel:
    """多任务感知机"""

    VERSION = 1

    def __init__(
        self,
        input_size: int,
        num_pairs: int,
        hidden_sizes: list[int],
        loss_weights: tuple[float, float] = (0.5, 0.5),
        circular_loss: bool = False,
        mask_unassisted: bool = True,
        seed: int = 0
    ):
        """
        Args:
            input_size: 特征维度
            num_pairs: K（每个模型对应固定的 K）
            hidden_sizes: 主干各隐藏层宽度
            loss_weights: (ξ_c, ξ_r)
            circular_loss: 回归损失是否用环形距离
            mask_unassisted: 回归损失是否忽略未辅助的用户对
            seed: 权重初始化种子
        """
        if input_size < 1 or num_pairs < 1:
            raise DomainError(f"网络尺寸必须为正: input={input_size}, K={num_pairs}")
        if not hidden_sizes or any(h < 1 for h in hidden_sizes):
            raise DomainError(f"隐藏层宽度必须为正: {hidden_sizes}")
        loss_total(0.0, 0.0, *loss_weights)

        self.input_size = int(input_size)
        self.num_pairs = int(num_pairs)
        self.hidden_sizes = [int(h) for h in hidden_sizes]
        self.loss_weights = (float(loss_weights[0]), float(loss_weights[1]))
        self.circular_loss = circular_loss
        self.mask_unassisted = mask_unassisted
        self.feature_mean = np.zeros(self.input_size)
        self.feature_std = np.ones(self.input_size)
        self.meta: dict = {}

        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        fan_in = self.input_size
        for i, width in enumerate(self.hidden_sizes):
            self.params[f"trunk_w{i}"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, width))
            self.params[f"trunk_b{i}"] = np.zeros(width)
            fan_in = width
        self.params["cls_w"] = rng.normal(0.0, np.sqrt(1.0 / fan_in), (fan_in, 2 * self.num_pairs))
        self.params["cls_b"] = np.zeros(2 * self.num_pairs)
        self.params["reg_w"] = rng.normal(0.0, np.sqrt(1.0 / fan_in), (fan_in, self.num_pairs))
        self.params["reg_b"] = np.zeros(self.num_pairs)

    @property
    def depth(self) -> int:
        return len(self.hidden_sizes)

    def tensor_names(self) -> list[str]:
        """参数名（序列化顺序）"""
        return list(self.params.keys())

    def fit_normalizer(self, features: np.ndarray) -> None:
        """用训练集统计量标准化特征，方差为 0 的维度不缩放"""
        features = np.asarray(features, dtype=float)
        self.feature_mean = features.mean(axis=0)
        std = features.std(axis=0)
        self.feature_std = np.where(std > 0, std, 1.0)

    def _check_input(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != self.input_size:
            raise DomainError(f"特征维度 {features.shape[1]} 与模型输入 {self.input_size} 不一致")
        return features

    def forward(self, features: np.ndarray, cache: Optional[dict] = None) -> tuple[np.ndarray, np.ndarray]:
        """前向传播

        Args:
            features: 原始特征 (M, input_size)
            cache: 传入 dict 时记录反向传播所需的中间量

        Returns:
            (分类概率 (M, K, 2), 回归输出 (M, K))
        """
        x = (self._check_input(features) - self.feature_mean) / self.feature_std
        activations = [x]
        for i in range(self.depth):
            x = relu(x @ self.params[f"trunk_w{i}"] + self.params[f"trunk_b{i}"])
            activations.append(x)

        logits = (x @ self.params["cls_w"] + self.params["cls_b"]).reshape(-1, self.num_pairs, 2)
        probs = softmax(logits, axis=-1)
        reg = sigmoid(x @ self.params["reg_w"] + self.params["reg_b"])

        if cache is not None:
            cache["activations"] = activations
            cache["probs"] = probs
            cache["reg"] = reg
        return probs, reg

    def predict(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """推理：返回 (每个用户对接入 RIS 的概率 (M, K), 归一化相位 (M, K))"""
        probs, reg = self.forward(features)
        return probs[..., 1], reg

    def _regression_mask(self, class_labels: np.ndarray) -> Optional[np.ndarray]:
        return np.asarray(class_labels, dtype=float) if self.mask_unassisted else None

    def losses(
        self,
        features: np.ndarray,
        class_labels: np.ndarray,
        reg_labels: np.ndarray
    ) -> tuple[float, float, float]:
        """(ι, ι_c, ι_r)"""
        probs, reg = self.forward(features)
        loss_cls = loss_classification(probs, one_hot_assist(class_labels))
        loss_reg = loss_regression(reg, reg_labels, self._regression_mask(class_labels), self.circular_loss)
        return loss_total(loss_cls, loss_reg, *self.loss_weights), loss_cls, loss_reg

    def gradients(
        self,
        features: np.ndarray,
        class_labels: np.ndarray,
        reg_labels: np.ndarray
    ) -> tuple[tuple[float, float, float], dict[str, np.ndarray]]:
        """反向传播

        Args:
            features: 原始特征 (M, input_size)
            class_labels: F (M, K)
            reg_labels: 归一化相位 (M, K)

        Returns:
            ((ι, ι_c, ι_r), 与 params 同键的梯度)
        """
        cache: dict = {}
        probs, reg = self.forward(features, cache)
        targets = one_hot_assist(class_labels)
        reg_labels = np.atleast_2d(np.asarray(reg_labels, dtype=float))
        mask = self._regression_mask(class_labels)
        weight_cls, weight_reg = self.loss_weights

        loss_cls = loss_classification(probs, targets)
        loss_reg = loss_regression(reg, reg_labels, mask, self.circular_loss)
        total = loss_total(loss_cls, loss_reg, weight_cls, weight_reg)

        batch = probs.shape[0]
        # 交叉熵 + softmax 的梯度
        d_logits = weight_cls * (probs - targets) / (batch * self.num_pairs)
        d_logits = d_logits.reshape(batch, 2 * self.num_pairs)

        residual = _regression_residual(reg, reg_labels, self.circular_loss)
        if mask is None:
            d_reg = 2.0 * residual / residual.size
        else:
            count = float(np.sum(mask))
            d_reg = 2.0 * residual * mask / count if count > 0 else np.zeros_like(residual)
        d_reg_logits = weight_reg * d_reg * reg * (1.0 - reg)

        activations = cache["activations"]
        hidden = activations[-1]
        grads = {
            "cls_w": hidden.T @ d_logits,
            "cls_b": d_logits.sum(axis=0),
            "reg_w": hidden.T @ d_reg_logits,
            "reg_b": d_reg_logits.sum(axis=0),
        }
        d_hidden = d_logits @ self.params["cls_w"].T + d_reg_logits @ self.params["reg_w"].T

        for i in reversed(range(self.depth)):
            d_hidden = d_hidden * (activations[i + 1] > 0)
            grads[f"trunk_w{i}"] = activations[i].T @ d_hidden
            grads[f"trunk_b{i}"] = d_hidden.sum(axis=0)
            d_hidden = d_hidden @ self.params[f"trunk_w{i}"].T

        return (total, loss_cls, loss_reg), {name: grads[name] for name in self.params}

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params.values())

    def copy_params(self) -> dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.params.items()}

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        for name, value in params.items():
            if name not in self.params or self.params[name].shape != value.shape:
                raise DomainError(f"参数 {name} 与网络结构不一致")
            self.params[name] = np.array(value, dtype=float)
