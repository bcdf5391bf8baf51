# -*- coding: utf-8 -*-

"""
制造解测试问题
∂_t u - ∇·(A∇u) = F      in (0,T] × Ω
u(0,·) = u_0,  u = g_D on Γ_D,  n·A∇u = g_N on Γ_N
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import torch

from NN.autodiff import DTYPE
from PDE.domain import DIRICHLET, NEUMANN, BoxDomain, PointClouds
from PDE.nitsche import DiffusionSpec, StepData

FLAVORS = ("dirichlet-heat", "neumann-heat", "custom")


class ProblemError(Exception):
    """测试问题异常"""

    pass


@dataclass(frozen=True)
class Problem:
    """
    PDE 问题数据
    forcing(t, x), dirichlet(t, x), exact(t, x): t 为标量或 (N,) 张量，x 为 (N, d)
    neumann(t, x, normals): 法向通量数据
    initial(x): 初值
    """

    name: str
    flavor: str
    domain: BoxDomain
    diffusion: DiffusionSpec
    forcing: Callable
    dirichlet: Callable
    neumann: Callable
    initial: Callable
    exact: Optional[Callable] = None
    horizon: float = 1.0

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ProblemError(f"未知问题类型 {self.flavor}")
        if self.diffusion.dim != self.domain.dim:
            raise ProblemError(f"扩散张量维数 {self.diffusion.dim} 与区域维数 {self.domain.dim} 不一致")

    @property
    def dim(self) -> int:
        return self.domain.dim

    def step_data(self, t: float, clouds: PointClouds) -> StepData:
        """在 t 时刻、给定点云上求 F、g_D、g_N"""
        return StepData(
            forcing=self.forcing(t, clouds.interior),
            dirichlet=self.dirichlet(t, clouds.dirichlet),
            neumann=self.neumann(t, clouds.neumann, clouds.neumann_normals),
        )

    def require_exact(self) -> Callable:
        if self.exact is None:
            raise ProblemError(f"问题 {self.name} 没有精确解")
        return self.exact


def _time(t, x: torch.Tensor) -> torch.Tensor:
    return torch.as_tensor(t, dtype=DTYPE).expand(x.shape[0]) if x.shape[0] else torch.zeros(0, dtype=DTYPE)


def problem_dirichlet_sine(dim: int) -> Problem:
    """
    u = sin(t) sin(x_1 + ... + x_d) 于 [0,1]^d，全部边界为 Dirichlet
    F = cos(t) sin(Σx) + d sin(t) sin(Σx)
    """
    if dim < 1:
        raise ProblemError(f"维数必须 >= 1: {dim}")

    def exact(t, x):
        return torch.sin(_time(t, x)) * torch.sin(x.sum(dim=1))

    def forcing(t, x):
        s = x.sum(dim=1)
        tt = _time(t, x)
        return torch.cos(tt) * torch.sin(s) + dim * torch.sin(tt) * torch.sin(s)

    def neumann(t, x, normals):
        return torch.sin(_time(t, x)) * torch.cos(x.sum(dim=1)) * normals.sum(dim=1)

    def initial(x):
        return torch.zeros(x.shape[0], dtype=DTYPE)

    return Problem(
        name=f"dirichlet-sine-{dim}d",
        flavor="dirichlet-heat",
        domain=BoxDomain.unit(dim, DIRICHLET),
        diffusion=DiffusionSpec.identity(dim),
        forcing=forcing,
        dirichlet=exact,
        neumann=neumann,
        initial=initial,
        exact=exact,
    )


def problem_neumann_product(dim: int) -> Problem:
    """
    u = ½(exp(-dπ²t) Π cos(πx_i) + 2) 于 [0,1]^d，齐次 Neumann 边界
    质量 ∫u dx = 1 对所有 t 成立
    """
    if dim < 1:
        raise ProblemError(f"维数必须 >= 1: {dim}")

    def exact(t, x):
        decay = torch.exp(-dim * math.pi ** 2 * _time(t, x))
        return 0.5 * (decay * torch.cos(math.pi * x).prod(dim=1) + 2.0)

    def zero(t, x):
        return torch.zeros(x.shape[0], dtype=DTYPE)

    def neumann(t, x, normals):
        return torch.zeros(x.shape[0], dtype=DTYPE)

    def initial(x):
        return exact(0.0, x)

    return Problem(
        name=f"neumann-product-{dim}d",
        flavor="neumann-heat",
        domain=BoxDomain.unit(dim, NEUMANN),
        diffusion=DiffusionSpec.identity(dim),
        forcing=zero,
        dirichlet=exact,
        neumann=neumann,
        initial=initial,
        exact=exact,
    )


PROBLEM_FACTORIES = {
    "dirichlet-heat": problem_dirichlet_sine,
    "neumann-heat": problem_neumann_product,
}


def make_problem(flavor: str, dim: int) -> Problem:
    """按类型名构造问题"""
    try:
        return PROBLEM_FACTORIES[flavor](dim)
    except KeyError:
        raise ProblemError(f"没有内置的 {flavor} 问题，可选 {', '.join(PROBLEM_FACTORIES)}")


def pde_residual(problem: Problem, t: torch.Tensor, x: torch.Tensor, step: float = 1e-3) -> torch.Tensor:
    """
    用四阶中心差分计算精确解的 PDE 残差 ∂_t u - Σ A_ii ∂_ii u - F

    Args:
        problem (Problem): 带精确解的问题（扩散张量须为对角阵）
        t (torch.Tensor): (N,) 时刻
        x (torch.Tensor): (N, d) 空间点
        step (float): 差分步长

    Returns:
        torch.Tensor: (N,) 残差
    """
    u = problem.require_exact()
    a = problem.diffusion.matrix
    if not torch.equal(a, torch.diag(torch.diagonal(a))):
        raise ProblemError("差分残差检查只支持对角扩散张量")

    h = step

    def first(f):
        return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)

    def second(f):
        return (-f(2 * h) + 16 * f(h) - 30 * f(0.0) + 16 * f(-h) - f(-2 * h)) / (12 * h * h)

    u_t = first(lambda s: u(t + s, x))
    diffusion = torch.zeros_like(u_t)
    for i in range(problem.dim):
        unit = torch.zeros(problem.dim, dtype=DTYPE)
        unit[i] = 1.0
        diffusion = diffusion + a[i, i] * second(lambda s: u(t, x + s * unit))
    return u_t - diffusion - problem.forcing(t, x)


def residual_check(problem: Problem, n_points: int = 100, seed: int = 0) -> float:
    """
    在随机 (t, x) 上检查精确解满足 PDE

    Returns:
        float: 最大残差绝对值
    """
    generator = torch.Generator().manual_seed(seed)
    t = 0.05 + 0.9 * problem.horizon * torch.rand(n_points, generator=generator, dtype=DTYPE)
    lo = torch.tensor(problem.domain.lower, dtype=DTYPE)
    x = lo + problem.domain.widths * torch.rand(n_points, problem.dim, generator=generator, dtype=DTYPE)
    return float(pde_residual(problem, t, x).abs().max())


def grid_quadrature(domain: BoxDomain, points_per_axis: int = 16):
    """
    张量积 Gauss-Legendre 求积

    Returns:
        tuple: (points (n^d, d), weights (n^d,))
    """
    nodes, weights = np.polynomial.legendre.leggauss(points_per_axis)
    axes_points, axes_weights = [], []
    for a, b in zip(domain.lower, domain.upper):
        axes_points.append(0.5 * (b - a) * nodes + 0.5 * (b + a))
        axes_weights.append(0.5 * (b - a) * weights)
    mesh = np.meshgrid(*axes_points, indexing="ij")
    wmesh = np.meshgrid(*axes_weights, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)
    w = np.prod(np.stack([m.reshape(-1) for m in wmesh], axis=1), axis=1)
    return torch.from_numpy(points).to(DTYPE), torch.from_numpy(w).to(DTYPE)


def total_mass(problem: Problem, t: float, points_per_axis: int = 16) -> float:
    """∫_Ω u(t, x) dx（张量积求积）"""
    points, weights = grid_quadrature(problem.domain, points_per_axis)
    return float(torch.sum(weights * problem.require_exact()(t, points)))
