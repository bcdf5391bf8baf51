# -*- coding: utf-8 -*-

"""
通用训练循环：学习率表、SGD 更新、停止准则与发散检测
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import pandas as pd
import torch

from NN.autodiff import NonFiniteError, gradient
from utils.logger import get_error_logger, get_training_logger

OPTIMIZERS = ("sgd", "momentum", "adam")

# loss_fn(epoch) -> (求导用的目标张量, 记录用的损失值, 附加诊断)
LossFunction = Callable[[int], Tuple[torch.Tensor, float, Dict[str, float]]]


class TrainingError(Exception):
    """训练异常"""

    pass


class DivergenceError(TrainingError):
    """损失发散"""

    def __init__(self, message: str, epoch: int, loss: float, initial_loss: float):
        super().__init__(message)
        self.epoch = epoch
        self.loss = loss
        self.initial_loss = initial_loss


@dataclass(frozen=True)
class LrSchedule:
    """
    分段常数学习率
    breakpoints: ((起始 epoch, 学习率), ...)，epoch 从 1 开始计数，门限严格递增
    """

    breakpoints: tuple

    def __post_init__(self):
        if not self.breakpoints:
            raise TrainingError("学习率表不能为空")
        thresholds = [int(e) for e, _ in self.breakpoints]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise TrainingError(f"学习率表门限必须严格递增: {thresholds}")
        for _, rate in self.breakpoints:
            if not rate > 0:
                raise TrainingError(f"学习率必须为正: {rate}")

    @classmethod
    def constant(cls, rate: float) -> "LrSchedule":
        return cls(((1, float(rate)),))

    @classmethod
    def from_pairs(cls, pairs: Sequence) -> "LrSchedule":
        """由 [[epoch, rate], ...] 或 [{"from": e, "rate": r}, ...] 构造"""
        items = []
        for pair in pairs:
            if isinstance(pair, dict):
                items.append((int(pair["from"]), float(pair["rate"])))
            else:
                epoch, rate = pair
                items.append((int(epoch), float(rate)))
        return cls(tuple(items))

    def rate_at(self, epoch: int) -> float:
        rate = self.breakpoints[0][1]
        for threshold, value in self.breakpoints:
            if epoch >= threshold:
                rate = value
            else:
                break
        return float(rate)

    def to_list(self) -> list:
        return [[int(e), float(r)] for e, r in self.breakpoints]


@dataclass(frozen=True)
class TrainingConfig:
    """一次优化的预算与规则"""

    epochs: int
    schedule: LrSchedule
    tol: float = 1e-8
    optimizer: str = "sgd"
    momentum: float = 0.9
    divergence_factor: float = 1e6
    log_every: int = 100

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainingError(f"epoch 数必须 >= 1: {self.epochs}")
        if self.tol < 0:
            raise TrainingError(f"停止阈值不能为负: {self.tol}")
        if self.optimizer not in OPTIMIZERS:
            raise TrainingError(f"未知优化器 {self.optimizer}，可选 {OPTIMIZERS}")


@dataclass
class TrainingResult:
    """训练结果：运行的 epoch 数、首末损失、停止原因与逐 epoch 记录"""

    epochs_run: int
    initial_loss: float
    final_loss: float
    stopped: str
    runtime: float
    history: list = field(default_factory=list)

    def frame(self, **columns) -> pd.DataFrame:
        """逐 epoch 记录转为 DataFrame，附加常数列（如 step）"""
        frame = pd.DataFrame(self.history)
        for i, (name, value) in enumerate(columns.items()):
            frame.insert(i, name, value)
        return frame


def sgd_step(theta: torch.Tensor, grad: torch.Tensor, rate: float) -> torch.Tensor:
    """
    一步梯度下降 θ' = θ - rate · ∇L

    Args:
        theta (torch.Tensor): 展平参数
        grad (torch.Tensor): 展平梯度
        rate (float): 学习率

    Returns:
        torch.Tensor: 新参数
    """
    if theta.shape != grad.shape:
        raise TrainingError(f"参数与梯度形状不一致: {tuple(theta.shape)} vs {tuple(grad.shape)}")
    updated = theta - rate * grad
    if not bool(torch.isfinite(updated).all()):
        raise TrainingError("参数更新出现非有限值")
    return updated


def _make_optimizer(net, config: TrainingConfig) -> Optional[torch.optim.Optimizer]:
    rate = config.schedule.rate_at(1)
    if config.optimizer == "momentum":
        return torch.optim.SGD(net.parameters(), lr=rate, momentum=config.momentum)
    if config.optimizer == "adam":
        return torch.optim.Adam(net.parameters(), lr=rate)
    return None


def _assign_gradient(net, flat_grad: torch.Tensor) -> None:
    offset = 0
    for param in net.parameters():
        n = param.numel()
        param.grad = flat_grad[offset:offset + n].view_as(param).clone()
        offset += n


def train_network(
    net,
    loss_fn: LossFunction,
    config: TrainingConfig,
    label: str = "",
    start_epoch: int = 1,
    on_epoch: Optional[Callable[[int, dict], None]] = None,
) -> TrainingResult:
    """
    训练网络直到参数变化小于 tol 或达到 epoch 上限

    Args:
        net: 被训练的网络（原地更新）
        loss_fn (LossFunction): 每个 epoch 调用一次
        config (TrainingConfig): 训练规则
        label (str): 日志前缀
        start_epoch (int): 断点续训时的起始 epoch
        on_epoch: 每个 epoch 结束后的回调 (epoch, 记录)

    Returns:
        TrainingResult: 训练结果
    """
    logger = get_training_logger()
    optimizer = _make_optimizer(net, config)
    history = []
    initial_loss = None
    value = float("nan")
    stopped = "epochs"
    started = time.time()
    epoch = start_epoch - 1

    for epoch in range(start_epoch, config.epochs + 1):
        objective, value, extras = loss_fn(epoch)
        if not math.isfinite(value):
            get_error_logger().error(f"{label} epoch {epoch} 损失非有限: {value}")
            raise TrainingError(f"{label} epoch {epoch} 损失非有限: {value}")
        if initial_loss is None:
            initial_loss = value
        threshold = config.divergence_factor * max(abs(initial_loss), 1.0)
        if abs(value) > threshold:
            message = f"{label} epoch {epoch} 损失发散: {value:.4e} > {threshold:.4e}（初始 {initial_loss:.4e}）"
            get_error_logger().error(message)
            raise DivergenceError(message, epoch, value, initial_loss)

        try:
            grad = gradient(objective, net.parameters())
        except NonFiniteError as e:
            raise TrainingError(f"{label} epoch {epoch} 梯度非有限（索引 {e.index}）") from e

        rate = config.schedule.rate_at(epoch)
        theta = net.flat()
        if optimizer is None:
            net.load_flat(sgd_step(theta, grad, rate))
        else:
            for group in optimizer.param_groups:
                group["lr"] = rate
            _assign_gradient(net, grad)
            optimizer.step()
            optimizer.zero_grad(set_to_none=True)
        change = float(torch.linalg.vector_norm(net.flat() - theta))

        record = {"epoch": epoch, "loss": value, "rate": rate, "step_norm": change, **extras}
        history.append(record)
        if on_epoch is not None:
            on_epoch(epoch, record)
        if config.log_every and epoch % config.log_every == 0:
            logger.info(f"{label} epoch {epoch}: loss = {value:.6e}, lr = {rate:.1e}, |Δθ| = {change:.3e}")

        if change < config.tol:
            stopped = "tol"
            break

    runtime = time.time() - started
    logger.info(f"{label} 训练结束: {epoch} 个 epoch, 停止原因 {stopped}, loss = {value:.6e}, 用时 {runtime:.1f}s")
    return TrainingResult(
        epochs_run=epoch - start_epoch + 1,
        initial_loss=float("nan") if initial_loss is None else initial_loss,
        final_loss=value,
        stopped=stopped,
        runtime=runtime,
        history=history,
    )
