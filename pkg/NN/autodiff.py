# -*- coding: utf-8 -*-

"""
自动微分模块
空间导数以前向模式传播：每个中间量携带 (值, 一阶空间导数, 拉普拉斯迹)，
三者都是 torch 计算图上的节点；损失对参数的梯度由一次反向扫描得到 (forward-over-reverse)。
二阶部分只跟踪拉普拉斯迹，不构造完整 Hessian。
"""

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import torch

from utils.logger import get_training_logger

# 全部计算使用 float64
DTYPE = torch.float64


class AutodiffError(Exception):
    """自动微分异常"""

    pass


class NonFiniteError(AutodiffError):
    """出现 NaN/Inf 时抛出，index 指向第一个非有限元素"""

    def __init__(self, message: str, index: int = -1):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Activation:
    """逐元素激活函数及其一阶、二阶导数"""

    name: str
    fn: Callable[[torch.Tensor], torch.Tensor]
    first: Callable[[torch.Tensor], torch.Tensor]
    second: Callable[[torch.Tensor], torch.Tensor]
    # 二阶导数是否几乎处处非零
    smooth: bool


def _relu(z):
    return torch.clamp(z, min=0.0)


def _relu_first(z):
    # ReLU'(0) 取 0
    return (z > 0).to(z.dtype)


def _relu_second(z):
    return torch.zeros_like(z)


def _tanh_first(z):
    t = torch.tanh(z)
    return 1.0 - t * t


def _tanh_second(z):
    t = torch.tanh(z)
    return -2.0 * t * (1.0 - t * t)


def _sigmoid_first(z):
    s = torch.sigmoid(z)
    return s * (1.0 - s)


def _sigmoid_second(z):
    s = torch.sigmoid(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


ACTIVATIONS = {
    "relu": Activation("relu", _relu, _relu_first, _relu_second, smooth=False),
    "tanh": Activation("tanh", torch.tanh, _tanh_first, _tanh_second, smooth=True),
    "sigmoid": Activation("sigmoid", torch.sigmoid, _sigmoid_first, _sigmoid_second, smooth=True),
}


def get_activation(name: str) -> Activation:
    """
    按名称获取激活函数

    Args:
        name (str): relu / tanh / sigmoid

    Returns:
        Activation: 激活函数描述
    """
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise AutodiffError(f"未知激活函数 {name}，可选: {', '.join(ACTIVATIONS)}")


@dataclass
class SpatialJet:
    """
    空间射流 (value, grad, lap)

    value: (N, K) 取值
    grad:  (N, D, K) 对 D 个输入坐标的一阶导数，order 为 0 时为 None
    lap:   (N, K) 拉普拉斯迹，order 小于 2 时为 None（不是 0）
    trace_weights: (D,) 参与拉普拉斯迹的方向取 1，其余取 0
    """

    value: torch.Tensor
    grad: Optional[torch.Tensor] = None
    lap: Optional[torch.Tensor] = None
    trace_weights: Optional[torch.Tensor] = None

    @property
    def order(self) -> int:
        if self.grad is None:
            return 0
        return 1 if self.lap is None else 2

    def _trace_dot(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        # sum_i w_i * a_i * b_i 沿方向维
        return torch.einsum("ndk,ndk,d->nk", a, b, self.trace_weights)

    def linear(self, weight: torch.Tensor, bias: Optional[torch.Tensor] = None) -> "SpatialJet":
        """仿射变换 W s + b（W 形状为 (out, in)）"""
        wt = weight.t()
        value = self.value @ wt
        if bias is not None:
            value = value + bias
        grad = None if self.grad is None else self.grad @ wt
        lap = None if self.lap is None else self.lap @ wt
        return SpatialJet(value, grad, lap, self.trace_weights)

    def __add__(self, other) -> "SpatialJet":
        if not isinstance(other, SpatialJet):
            return SpatialJet(self.value + other, self.grad, self.lap, self.trace_weights)
        grad = None if self.grad is None else self.grad + other.grad
        lap = None if self.lap is None else self.lap + other.lap
        return SpatialJet(self.value + other.value, grad, lap, self.trace_weights)

    def __mul__(self, other) -> "SpatialJet":
        if not isinstance(other, SpatialJet):
            grad = None if self.grad is None else self.grad * other
            lap = None if self.lap is None else self.lap * other
            return SpatialJet(self.value * other, grad, lap, self.trace_weights)

        a, b = self.value, other.value
        grad = lap = None
        if self.grad is not None:
            grad = a.unsqueeze(1) * other.grad + b.unsqueeze(1) * self.grad
        if self.lap is not None:
            lap = a * other.lap + b * self.lap + 2.0 * self._trace_dot(self.grad, other.grad)
        return SpatialJet(a * b, grad, lap, self.trace_weights)

    def one_minus(self) -> "SpatialJet":
        """1 - s"""
        grad = None if self.grad is None else -self.grad
        lap = None if self.lap is None else -self.lap
        return SpatialJet(1.0 - self.value, grad, lap, self.trace_weights)

    def activate(self, activation: Activation) -> "SpatialJet":
        """
        逐元素激活，截断 Taylor 规则：
        grad σ(z) = σ'(z) grad z,  lap σ(z) = σ''(z) |grad z|^2 + σ'(z) lap z
        """
        z = self.value
        value = activation.fn(z)
        if self.grad is None:
            return SpatialJet(value, None, None, self.trace_weights)

        d1 = activation.first(z)
        grad = d1.unsqueeze(1) * self.grad
        lap = None
        if self.lap is not None:
            lap = activation.second(z) * self._trace_dot(self.grad, self.grad) + d1 * self.lap
        return SpatialJet(value, grad, lap, self.trace_weights)

    def channel(self, k: int = 0) -> "SpatialJet":
        """取出第 k 个输出通道：value (N,), grad (N, D), lap (N,)"""
        grad = None if self.grad is None else self.grad[:, :, k]
        lap = None if self.lap is None else self.lap[:, k]
        return SpatialJet(self.value[:, k], grad, lap, self.trace_weights)


def seed_jet(x: torch.Tensor, order: int, trace_dims: Optional[Sequence[int]] = None) -> SpatialJet:
    """
    构造输入坐标的种子射流

    Args:
        x (torch.Tensor): (N, d_in) 输入点
        order (int): 0 / 1 / 2
        trace_dims (Optional[Sequence[int]]): 参与拉普拉斯迹的坐标，默认全部

    Returns:
        SpatialJet: grad 为单位阵，lap 为 0
    """
    if order not in (0, 1, 2):
        raise AutodiffError(f"导数阶数必须为 0/1/2，实际为 {order}")
    if x.dim() != 2:
        raise AutodiffError(f"输入必须是 (N, d) 张量，实际形状 {tuple(x.shape)}")

    n, d = x.shape
    weights = torch.zeros(d, dtype=x.dtype)
    if trace_dims is None:
        weights[:] = 1.0
    else:
        weights[list(trace_dims)] = 1.0

    if order == 0:
        return SpatialJet(x, None, None, weights)

    grad = torch.eye(d, dtype=x.dtype).expand(n, d, d)
    lap = torch.zeros(n, d, dtype=x.dtype) if order == 2 else None
    return SpatialJet(x, grad, lap, weights)


# 已经提示过的激活函数，避免每个 epoch 重复告警
_warned_activations = set()


def record_forward(model, x: torch.Tensor, order: int, trace_dims: Optional[Sequence[int]] = None) -> SpatialJet:
    """
    在计算图上记录一次网络求值及其空间导数

    Args:
        model: 提供 input_dim 与 propagate(jet) 的模型（DGMNet / TensorFeatureModel）
        x (torch.Tensor): (N, d_in) 求值点
        order (int): 0 只求值，1 附加梯度，2 附加拉普拉斯迹
        trace_dims (Optional[Sequence[int]]): 拉普拉斯迹的坐标子集（时空网络只对空间坐标求迹）

    Returns:
        SpatialJet: value (N,), grad (N, d_in), lap (N,)
    """
    x = torch.as_tensor(x, dtype=DTYPE)
    if x.dim() == 1:
        x = x.unsqueeze(0)
    if x.shape[1] != model.input_dim:
        raise AutodiffError(f"输入维度不匹配: 期望 {model.input_dim}，实际 {x.shape[1]}")

    activation = getattr(model, "activation", None)
    if order == 2 and activation is not None and not activation.smooth:
        if activation.name not in _warned_activations:
            _warned_activations.add(activation.name)
            get_training_logger().warning(
                f"激活函数 {activation.name} 的二阶导数几乎处处为零，拉普拉斯只剩门控乘积的贡献，扩散项可能失真"
            )

    return model.propagate(seed_jet(x, order, trace_dims)).channel(0)


def check_finite(values: torch.Tensor, what: str) -> None:
    """
    检查张量是否全部有限

    Args:
        values (torch.Tensor): 待检查张量
        what (str): 出错时的描述

    Raises:
        NonFiniteError: 带第一个非有限元素的展平索引
    """
    bad = torch.nonzero(~torch.isfinite(values.detach().reshape(-1)))
    if bad.numel() > 0:
        index = int(bad[0, 0])
        raise NonFiniteError(f"{what} 在索引 {index} 处非有限", index=index)


def gradient(loss: torch.Tensor, parameters: Iterable[torch.Tensor], retain_graph: bool = False) -> torch.Tensor:
    """
    对计算图做一次反向扫描，返回展平的参数梯度

    Args:
        loss (torch.Tensor): 标量损失
        parameters (Iterable[torch.Tensor]): 参数叶子节点，顺序即展平顺序
        retain_graph (bool): 是否保留计算图

    Returns:
        torch.Tensor: 与展平参数等长的梯度向量
    """
    params = list(parameters)
    if loss.numel() != 1:
        raise AutodiffError(f"损失必须是标量，实际形状 {tuple(loss.shape)}")
    check_finite(loss, "损失值")

    if not loss.requires_grad:
        # 与参数无关的常数损失
        return torch.zeros(sum(p.numel() for p in params), dtype=DTYPE)

    grads = torch.autograd.grad(loss, params, allow_unused=True, retain_graph=retain_graph)
    flat = torch.cat(
        [(g if g is not None else torch.zeros_like(p)).reshape(-1) for g, p in zip(grads, params)]
    )
    check_finite(flat, "参数梯度")
    return flat
