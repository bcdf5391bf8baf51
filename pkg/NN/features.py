# -*- coding: utf-8 -*-

"""
线性特征模型 w(x) = Σ_j c_j φ_j(x)
φ_j 为张量积余弦基 Π_i cos(k_i π x_i)，k_i = 0..K-1。
对参数是线性的，用于离散向后 Euler 系统的直接求解对照。
"""

import itertools
import math

import torch
from torch import nn
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from NN.autodiff import DTYPE, SpatialJet, record_forward


class TensorFeatureModel(nn.Module):
    """张量积余弦基上的线性模型"""

    def __init__(self, input_dim: int, modes: int = 5):
        super().__init__()
        self.dim = input_dim
        self.modes = modes
        # (J, d) 每个基函数在各坐标上的频率
        self.register_buffer(
            "frequencies",
            torch.tensor(list(itertools.product(range(modes), repeat=input_dim)), dtype=DTYPE) * math.pi,
        )
        self.coefficients = nn.Parameter(torch.zeros(self.frequencies.shape[0], dtype=DTYPE))
        self.activation = None

    @property
    def input_dim(self) -> int:
        return self.dim

    @property
    def size(self) -> int:
        return self.frequencies.shape[0]

    def features(self, x: torch.Tensor, order: int = 0, trace_weights: torch.Tensor = None):
        """
        基函数及其导数

        Returns:
            tuple: phi (N, J)，dphi (N, d, J) 或 None，lap_phi (N, J) 或 None
        """
        arg = x.unsqueeze(2) * self.frequencies.t().unsqueeze(0)  # (N, d, J)
        cos = torch.cos(arg)
        phi = cos.prod(dim=1)
        if order == 0:
            return phi, None, None

        sin = torch.sin(arg)
        k = self.frequencies.t().unsqueeze(0)  # (1, d, J)
        dphi = torch.empty_like(arg)
        for i in range(self.dim):
            others = torch.cat([cos[:, :i], cos[:, i + 1:]], dim=1).prod(dim=1)
            dphi[:, i] = -k[:, i] * sin[:, i] * others
        if order == 1:
            return phi, dphi, None

        if trace_weights is None:
            trace_weights = torch.ones(self.dim, dtype=DTYPE)
        # ∂²φ/∂x_i² = -(k_i)^2 φ
        lap_phi = -phi * (k[0] ** 2 * trace_weights.unsqueeze(1)).sum(dim=0)
        return phi, dphi, lap_phi

    def propagate(self, x: SpatialJet) -> SpatialJet:
        phi, dphi, lap_phi = self.features(x.value, x.order, x.trace_weights)
        c = self.coefficients.unsqueeze(1)
        value = phi @ c
        grad = None if dphi is None else dphi @ c
        lap = None if lap_phi is None else lap_phi @ c
        return SpatialJet(value, grad, lap, x.trace_weights)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = torch.as_tensor(x, dtype=DTYPE)
        phi, _, _ = self.features(x)
        return phi @ self.coefficients

    def jet(self, x, order, trace_dims=None) -> SpatialJet:
        return record_forward(self, x, order, trace_dims)

    def flat(self) -> torch.Tensor:
        return parameters_to_vector(self.parameters()).detach().clone()

    def load_flat(self, vector: torch.Tensor) -> None:
        with torch.no_grad():
            vector_to_parameters(torch.as_tensor(vector, dtype=DTYPE).clone(), list(self.parameters()))

    def clone(self) -> "TensorFeatureModel":
        copy = TensorFeatureModel(self.dim, self.modes)
        copy.load_flat(self.flat())
        return copy
