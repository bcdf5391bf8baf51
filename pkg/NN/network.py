# -*- coding: utf-8 -*-

"""
DGM 残差（highway）网络
S^1 = σ(W^1 x + b^1)
Z^l, G^l, R^l = σ(U x + W S^l + b)
H^l = σ(U^h x + W^h (S^l ⊙ R^l) + b^h)
S^{l+1} = (1 - G^l) ⊙ H^l + Z^l ⊙ S^l
f = W S^{L+1} + b
所有块宽度统一为 M；L = 0 时退化为单隐层感知机。
"""

import math
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import torch
from torch import nn
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from NN.autodiff import DTYPE, ACTIVATIONS, SpatialJet, get_activation, record_forward, seed_jet

GATES = ("z", "g", "r", "h")


class NetworkError(Exception):
    """网络结构或参数异常"""

    pass


@dataclass(frozen=True)
class Architecture:
    """网络结构超参数"""

    input_dim: int
    output_dim: int = 1
    blocks: int = 3
    width: int = 50
    activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise NetworkError(f"输入/输出宽度必须为正: d_in={self.input_dim}, d_out={self.output_dim}")
        if self.blocks < 0:
            raise NetworkError(f"块数不能为负: {self.blocks}")
        if self.width < 1:
            raise NetworkError(f"宽度必须 >= 1: {self.width}")
        if self.activation not in ACTIVATIONS:
            raise NetworkError(f"未知激活函数 {self.activation}")

    @property
    def parameter_count(self) -> int:
        d, m, o, blocks = self.input_dim, self.width, self.output_dim, self.blocks
        return m * d + m + blocks * (4 * (m * d + m * m + m)) + o * m + o

    def to_dict(self) -> dict:
        return asdict(self)


class Dense(nn.Module):
    """仿射层，权重形状 (out, in)"""

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(out_features, in_features, dtype=DTYPE))
        self.bias = nn.Parameter(torch.zeros(out_features, dtype=DTYPE))


class HighwayBlock(nn.Module):
    """一个 DGM 块：门 Z、G、R 与候选状态 H，各含 U、W、b"""

    def __init__(self, input_dim: int, width: int):
        super().__init__()
        # 注册顺序决定展平顺序：U^z, W^z, b^z, U^g, ..., b^h
        for gate in GATES:
            self.register_parameter(f"U_{gate}", nn.Parameter(torch.zeros(width, input_dim, dtype=DTYPE)))
            self.register_parameter(f"W_{gate}", nn.Parameter(torch.zeros(width, width, dtype=DTYPE)))
            self.register_parameter(f"b_{gate}", nn.Parameter(torch.zeros(width, dtype=DTYPE)))

    def propagate(self, x: SpatialJet, s: SpatialJet, activation) -> SpatialJet:
        z = (x.linear(self.U_z) + s.linear(self.W_z, self.b_z)).activate(activation)
        g = (x.linear(self.U_g) + s.linear(self.W_g, self.b_g)).activate(activation)
        r = (x.linear(self.U_r) + s.linear(self.W_r, self.b_r)).activate(activation)
        h = (x.linear(self.U_h) + (s * r).linear(self.W_h, self.b_h)).activate(activation)
        return g.one_minus() * h + z * s


class DGMNet(nn.Module):
    """DGM 残差网络，参数全为 0 初始化；随机初始化见 init_xavier"""

    def __init__(self, architecture: Architecture):
        super().__init__()
        self.architecture = architecture
        self.activation = get_activation(architecture.activation)

        m = architecture.width
        self.input_layer = Dense(architecture.input_dim, m)
        self.blocks = nn.ModuleList(HighwayBlock(architecture.input_dim, m) for _ in range(architecture.blocks))
        self.output_layer = Dense(m, architecture.output_dim)

    @property
    def input_dim(self) -> int:
        return self.architecture.input_dim

    def propagate(self, x: SpatialJet) -> SpatialJet:
        """沿网络传播输入射流，返回 (N, d_out) 输出射流"""
        s = x.linear(self.input_layer.weight, self.input_layer.bias).activate(self.activation)
        for block in self.blocks:
            s = block.propagate(x, s, self.activation)
        return s.linear(self.output_layer.weight, self.output_layer.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """
        网络求值

        Args:
            x (torch.Tensor): (N, d_in) 或 (d_in,)

        Returns:
            torch.Tensor: d_out = 1 时形状 (N,)，否则 (N, d_out)
        """
        x = torch.as_tensor(x, dtype=DTYPE)
        if x.dim() == 1:
            x = x.unsqueeze(0)
        if x.shape[1] != self.input_dim:
            raise NetworkError(f"输入维度不匹配: 期望 {self.input_dim}，实际 {x.shape[1]}")
        out = self.propagate(seed_jet(x, 0)).value
        return out[:, 0] if self.architecture.output_dim == 1 else out

    def jet(self, x: torch.Tensor, order: int, trace_dims: Optional[Sequence[int]] = None) -> SpatialJet:
        """求值并附带空间导数，见 record_forward"""
        return record_forward(self, x, order, trace_dims)

    def flat(self) -> torch.Tensor:
        """展平参数向量（拷贝）"""
        return parameters_to_vector(self.parameters()).detach().clone()

    def load_flat(self, vector: torch.Tensor) -> None:
        """
        用展平向量覆盖参数

        Args:
            vector (torch.Tensor): 长度等于 parameter_count
        """
        vector = torch.as_tensor(vector, dtype=DTYPE)
        expected = self.architecture.parameter_count
        if vector.numel() != expected:
            raise NetworkError(f"参数向量长度不匹配: 期望 {expected}，实际 {vector.numel()}")
        with torch.no_grad():
            vector_to_parameters(vector.clone(), list(self.parameters()))

    def clone(self) -> "DGMNet":
        """参数逐位相同的副本（热启动）"""
        copy = DGMNet(self.architecture)
        copy.load_flat(self.flat())
        return copy


def init_xavier(architecture: Architecture, seed: int) -> DGMNet:
    """
    Xavier 均匀初始化：权重 ~ U(±sqrt(6/(fan_in+fan_out)))，偏置为 0

    Args:
        architecture (Architecture): 网络结构
        seed (int): 随机种子

    Returns:
        DGMNet: 初始化后的网络
    """
    net = DGMNet(architecture)
    generator = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for param in net.parameters():
            if param.dim() != 2:
                continue
            fan_out, fan_in = param.shape
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            param.uniform_(-bound, bound, generator=generator)
    return net
