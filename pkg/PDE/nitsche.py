# -*- coding: utf-8 -*-

"""
离散 Nitsche 能量 Ñ(w; v)、自适应罚参数 γ 与离散强制性下界

Ñ(w;v) = |Ω|/N_I Σ (½|√A∇w|² - F w)
         - |Γ_D|/N_D Σ n·A∇w (w - g_D)
         + |Γ_D|/N_D Σ γ(x;v)/2 (w - g_D)²
         - |Γ_N|/N_N Σ g_N w
"""

from dataclasses import dataclass
from typing import Dict, Optional

import torch

from NN.autodiff import DTYPE, NonFiniteError, check_finite
from PDE.domain import DIRICHLET, NEUMANN, Matching, PointClouds, match_nearest_interior
from utils.logger import get_training_logger

PENALTY_MODES = ("max", "pointwise")
DEFAULT_FACTORS = {"max": 500.0, "pointwise": 8.0}


class NitscheError(Exception):
    """Nitsche 泛函计算异常"""

    pass


@dataclass(frozen=True)
class DiffusionSpec:
    """常数对称正定扩散张量 A 及其极端特征值"""

    matrix: torch.Tensor
    sqrt_matrix: torch.Tensor
    lambda_min: float
    lambda_max: float

    @classmethod
    def from_matrix(cls, matrix) -> "DiffusionSpec":
        """
        由矩阵构造，√A 通过对称特征分解一次性计算

        Args:
            matrix: (d, d) 对称正定矩阵
        """
        a = torch.as_tensor(matrix, dtype=DTYPE)
        if a.dim() != 2 or a.shape[0] != a.shape[1]:
            raise NitscheError(f"扩散张量必须是方阵，实际形状 {tuple(a.shape)}")
        if not torch.allclose(a, a.t(), atol=1e-12, rtol=0.0):
            raise NitscheError("扩散张量必须对称")
        eigenvalues, eigenvectors = torch.linalg.eigh(a)
        if eigenvalues[0] <= 0:
            raise NitscheError(f"扩散张量必须正定，最小特征值 {float(eigenvalues[0])}")
        sqrt_a = eigenvectors @ torch.diag(torch.sqrt(eigenvalues)) @ eigenvectors.t()
        return cls(a, sqrt_a, float(eigenvalues[0]), float(eigenvalues[-1]))

    @classmethod
    def identity(cls, dim: int, scale: float = 1.0) -> "DiffusionSpec":
        return cls.from_matrix(scale * torch.eye(dim, dtype=DTYPE))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_isotropic(self) -> bool:
        return bool(torch.allclose(self.matrix, self.lambda_max * torch.eye(self.dim, dtype=DTYPE), atol=1e-14))


@dataclass(frozen=True)
class PenaltyConfig:
    """
    罚参数规则
    pointwise: γ(x_n) = factor · |Γ_D| N_I λd² / (|Ω| N_D λ1) · |∇w(x_n)|² / |∇w(y_n)|²
    max:       对上式取边界点最大值，所有点共用
    grad_floor > 0 时分母 |∇w(y_n)|² 不低于 grad_floor · 内部点 |∇w|² 的均值
    """

    mode: str = "max"
    factor: Optional[float] = None
    gamma_min: float = 1.0
    grad_floor: float = 0.0

    def __post_init__(self):
        if self.mode not in PENALTY_MODES:
            raise NitscheError(f"未知罚参数模式 {self.mode}，可选 {PENALTY_MODES}")
        if self.factor is not None and self.factor <= 0:
            raise NitscheError(f"安全系数必须为正: {self.factor}")
        if self.gamma_min <= 0:
            raise NitscheError(f"γ_min 必须为正: {self.gamma_min}")
        if self.grad_floor < 0:
            raise NitscheError(f"梯度下限不能为负: {self.grad_floor}")

    @property
    def safety_factor(self) -> float:
        return DEFAULT_FACTORS[self.mode] if self.factor is None else float(self.factor)


@dataclass(frozen=True)
class StepData:
    """某一时刻在点云上求值的数据：F（内部）、g_D（Dirichlet 点）、g_N（Neumann 点）"""

    forcing: torch.Tensor
    dirichlet: torch.Tensor
    neumann: torch.Tensor


def penalty_scale(clouds: PointClouds, diffusion: DiffusionSpec) -> float:
    """|Γ_D| N_I λd² / (|Ω| N_D λ1)"""
    n_d = clouds.count(DIRICHLET)
    if n_d == 0:
        return 0.0
    domain = clouds.domain
    return (
        domain.measure(DIRICHLET) * clouds.count("interior") * diffusion.lambda_max ** 2
        / (domain.volume * n_d * diffusion.lambda_min)
    )


def penalty(
    clouds: PointClouds,
    boundary_grad_norms: torch.Tensor,
    interior_grad_norms: torch.Tensor,
    matching: Matching,
    config: PenaltyConfig,
    diffusion: DiffusionSpec,
) -> torch.Tensor:
    """
    计算每个 Dirichlet 点上的罚参数

    Args:
        clouds (PointClouds): 点云
        boundary_grad_norms (torch.Tensor): (N_D,) |∇w(x_n^D)|
        interior_grad_norms (torch.Tensor): (N_I,) |∇w(x_n^I)|
        matching (Matching): 边界点到内部点 y_n 的匹配
        config (PenaltyConfig): 罚参数规则
        diffusion (DiffusionSpec): 扩散张量

    Returns:
        torch.Tensor: (N_D,) γ 值（常数，不参与反向传播），均 >= γ_min
    """
    n_d = clouds.count(DIRICHLET)
    if n_d == 0:
        return torch.zeros(0, dtype=DTYPE)

    base = config.safety_factor * penalty_scale(clouds, diffusion)
    if not matching.valid:
        fallback = config.gamma_min * base
        get_training_logger().warning(f"无有效匹配，罚参数回退为 γ_min·系数尺度 = {fallback:.4e}")
        return torch.full((n_d,), max(fallback, config.gamma_min), dtype=DTYPE)

    boundary_sq = boundary_grad_norms.detach().reshape(-1) ** 2
    interior_sq = interior_grad_norms.detach().reshape(-1) ** 2
    matched_sq = interior_sq[matching.indices]
    if config.grad_floor > 0:
        matched_sq = torch.clamp(matched_sq, min=config.grad_floor * float(interior_sq.mean()))
    values = base * boundary_sq / matched_sq
    if config.mode == "max":
        values = torch.full((n_d,), float(values.max()), dtype=DTYPE)
    return torch.clamp(values, min=config.gamma_min)


def compute_penalty(w, clouds: PointClouds, config: PenaltyConfig, diffusion: DiffusionSpec) -> torch.Tensor:
    """
    用网络 w 的当前参数在点云上计算罚参数（不记录计算图）

    Args:
        w: 网络（通常是上一个 epoch 的参数副本）
        clouds (PointClouds): 点云
        config (PenaltyConfig): 罚参数规则
        diffusion (DiffusionSpec): 扩散张量

    Returns:
        torch.Tensor: (N_D,) γ 值
    """
    if clouds.count(DIRICHLET) == 0:
        return torch.zeros(0, dtype=DTYPE)
    with torch.no_grad():
        interior_norms = torch.linalg.vector_norm(w.jet(clouds.interior, 1).grad, dim=1)
        boundary_norms = torch.linalg.vector_norm(w.jet(clouds.dirichlet, 1).grad, dim=1)
    matching = match_nearest_interior(clouds.dirichlet, clouds.interior, interior_norms)
    return penalty(clouds, boundary_norms, interior_norms, matching, config, diffusion)


def _checked(values: torch.Tensor, term: str) -> torch.Tensor:
    try:
        check_finite(values, term)
    except NonFiniteError as e:
        raise NitscheError(f"{term} 项在索引 {e.index} 处非有限") from e
    return values


def nitsche_terms(
    w,
    penalty_values: torch.Tensor,
    clouds: PointClouds,
    data: StepData,
    diffusion: DiffusionSpec,
    interior_factor: float = 0.5,
    penalty_divisor: float = 2.0,
) -> Dict[str, torch.Tensor]:
    """
    Ñ 的四个 Monte Carlo 项（均在计算图上）

    Returns:
        dict: energy / consistency / penalty / neumann
    """
    if penalty_values.numel() != clouds.count(DIRICHLET):
        raise NitscheError(
            f"罚参数个数 {penalty_values.numel()} 与 Dirichlet 点数 {clouds.count(DIRICHLET)} 不一致"
        )

    jet_i = w.jet(clouds.interior, 1)
    flux = jet_i.grad @ diffusion.sqrt_matrix
    energy_pts = interior_factor * torch.sum(flux * flux, dim=1) - data.forcing * jet_i.value
    terms = {"energy": clouds.integrate("interior", _checked(energy_pts, "内部能量"))}

    jet_d = w.jet(clouds.dirichlet, 1)
    jump = jet_d.value - data.dirichlet
    normal_flux = torch.sum((jet_d.grad @ diffusion.matrix) * clouds.dirichlet_normals, dim=1)
    terms["consistency"] = clouds.integrate(DIRICHLET, _checked(normal_flux * jump, "一致性"))
    penalty_pts = penalty_values.detach() / penalty_divisor * jump * jump
    terms["penalty"] = clouds.integrate(DIRICHLET, _checked(penalty_pts, "罚"))

    w_n = w.jet(clouds.neumann, 0).value
    terms["neumann"] = clouds.integrate(NEUMANN, _checked(data.neumann * w_n, "Neumann"))
    return terms


def nitsche_functional(
    w,
    penalty_values: torch.Tensor,
    clouds: PointClouds,
    data: StepData,
    diffusion: DiffusionSpec,
) -> torch.Tensor:
    """
    离散 Nitsche 泛函 Ñ(w; v)，罚参数作为常数参与

    Args:
        w: 网络
        penalty_values (torch.Tensor): (N_D,) 由 v 计算得到的 γ
        clouds (PointClouds): 点云
        data (StepData): 当前时刻的 F、g_D、g_N
        diffusion (DiffusionSpec): 扩散张量

    Returns:
        torch.Tensor: 标量，可对 w 的参数求导
    """
    terms = nitsche_terms(w, penalty_values, clouds, data, diffusion)
    return terms["energy"] - terms["consistency"] + terms["penalty"] - terms["neumann"]


def coercivity_bound(
    w,
    clouds: PointClouds,
    penalty_values: torch.Tensor,
    data: StepData,
    diffusion: DiffusionSpec,
) -> float:
    """
    离散强制性下界
    |Ω|/N_I Σ(¼|√A∇w|² - F w) + |Γ_D|/N_D Σ γ/4 (w - g_D)² - |Γ_N|/N_N Σ g_N w

    Returns:
        float: 下界值
    """
    with torch.no_grad():
        terms = nitsche_terms(w, penalty_values, clouds, data, diffusion, interior_factor=0.25, penalty_divisor=4.0)
    return float(terms["energy"] + terms["penalty"] - terms["neumann"])
