# -*- coding: utf-8 -*-

"""
深度 Wasserstein 法（JKO 格式）
每步最小化 ½ W_ε²(u^{k-1}, w) + τ ∫ w log w + μ(∫w - ∫u^{k-1})²，全部离散在同一组内部点上。
OT 项只看归一化权重，质量项固定网络的幅值。
OT 项对参数的梯度由收敛的对偶势 g 经归一化映射传回（包络定理），不展开 Sinkhorn 迭代。
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import torch

from NN.autodiff import gradient
from NN.network import Architecture
from OT.sinkhorn import SinkhornState, cost_matrix, divergence, sinkhorn
from PDE.domain import DIRICHLET, CloudSampler, PointClouds
from PDE.problems import Problem, ProblemError
from solvers.gradient_flow import fit_initial, record_step
from solvers.training import TrainingConfig, train_network
from solvers.trajectory import TimeGrid, Trajectory
from utils.logger import get_training_logger

DENSITY_FLOOR = 1e-8
ENTROPY_NORMALIZATIONS = ("raw", "mass")
DEFAULT_MASS_WEIGHT = 10.0


@dataclass(frozen=True)
class JkoConfig:
    """JKO 求解配置；epsilon 为 None 时取 0.01·diam(Ω)²"""

    initial: TrainingConfig
    step: TrainingConfig
    sampler: CloudSampler = field(compare=False)
    epsilon: Optional[float] = None
    sinkhorn_tol: float = 1e-9
    sinkhorn_iters: int = 10000
    divergence: bool = False
    entropy_normalization: str = "raw"
    mass_weight: float = DEFAULT_MASS_WEIGHT
    floor: float = DENSITY_FLOOR
    seed: int = 0

    def __post_init__(self):
        if self.entropy_normalization not in ENTROPY_NORMALIZATIONS:
            raise ProblemError(f"未知熵归一化方式 {self.entropy_normalization}，可选 {ENTROPY_NORMALIZATIONS}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ProblemError(f"ε 必须为正: {self.epsilon}")
        if self.mass_weight < 0:
            raise ProblemError(f"质量项权重不能为负: {self.mass_weight}")

    def resolved_epsilon(self, problem: Problem) -> float:
        return 0.01 * problem.domain.diameter_squared if self.epsilon is None else float(self.epsilon)


def density_weights(values: torch.Tensor, floor: float = DENSITY_FLOOR):
    """
    网络取值 -> 概率权重：截断到 floor 后归一化

    Returns:
        tuple: (权重 (N,)，和为 1；被截断的点数)
    """
    clamped = torch.clamp(values, min=floor)
    clamped_count = int((values.detach() < floor).sum())
    return clamped / clamped.sum(), clamped_count


def entropy_term(w, clouds: PointClouds, floor: float = DENSITY_FLOOR, normalization: str = "raw") -> torch.Tensor:
    """
    |Ω|/N_I Σ w log w，w 先截断到 floor
    normalization = "mass" 时先除以 ∫w，熵与网络幅值无关
    """
    values = torch.clamp(w(clouds.interior), min=floor)
    if normalization == "mass":
        values = values / clouds.integrate("interior", values)
    return clouds.integrate("interior", values * torch.log(values))


@dataclass
class JkoLoss:
    """
    一次 JKO 损失求值
    value: ½·OT + τ·熵 + 质量项（记录用）
    surrogate: 与 value 梯度相同的代理目标（对偶势视为常数）
    """

    value: float
    surrogate: torch.Tensor
    ot: float
    entropy: float
    mass: float
    state: SinkhornState
    clamped: int

    def gradient(self, parameters) -> torch.Tensor:
        return gradient(self.surrogate, parameters)


def jko_step_loss(
    w,
    u_prev,
    tau: float,
    clouds: PointClouds,
    epsilon: float,
    cost: Optional[torch.Tensor] = None,
    tol: float = 1e-9,
    max_iters: int = 10000,
    use_divergence: bool = False,
    entropy_normalization: str = "raw",
    mass_weight: float = DEFAULT_MASS_WEIGHT,
    floor: float = DENSITY_FLOOR,
) -> JkoLoss:
    """
    JKO 单步损失及其梯度代理

    Args:
        w: 当前网络
        u_prev: 上一步网络（冻结）
        tau (float): 步长
        clouds (PointClouds): 共享的内部点
        epsilon (float): Sinkhorn 正则化参数
        cost (Optional[torch.Tensor]): 预先算好的代价矩阵（冻结点云时复用）
        use_divergence (bool): 以 Sinkhorn 散度代替熵正则代价
        entropy_normalization (str): raw 直接用截断后的网络值，mass 先按 ∫w 归一化
        mass_weight (float): 质量项 μ(∫w - ∫u_prev)² 的权重，0 时不加

    Returns:
        JkoLoss: 损失值、梯度代理与诊断
    """
    x = clouds.interior
    with torch.no_grad():
        previous = u_prev(x)
        a, _ = density_weights(previous, floor)
        target_mass = float(clouds.integrate("interior", previous))

    values = w(x)
    b, clamped = density_weights(values, floor)
    cost = cost_matrix(x) if cost is None else cost

    if use_divergence:
        ot, potential, (state, _, _) = divergence(a, b.detach(), cost, epsilon, tol, max_iters)
    else:
        state = sinkhorn(a, b.detach(), cost, epsilon, tol, max_iters)
        ot, potential = state.objective, state.g

    entropy = entropy_term(w, clouds, floor, entropy_normalization)
    mass = clouds.integrate("interior", values)
    mass_term = mass_weight * (mass - target_mass) ** 2

    surrogate = 0.5 * torch.sum(potential.detach() * b) + tau * entropy + mass_term
    return JkoLoss(
        value=0.5 * ot + tau * float(entropy) + float(mass_term),
        surrogate=surrogate,
        ot=ot,
        entropy=float(entropy),
        mass=float(mass),
        state=state,
        clamped=clamped,
    )


def solve_jko(
    problem: Problem,
    architecture: Architecture,
    grid: TimeGrid,
    config: JkoConfig,
    checkpoint_dir: Optional[str] = None,
    resume: Optional[Trajectory] = None,
) -> Trajectory:
    """
    深度 Wasserstein 法：初值拟合后逐步最小化 JKO 泛函

    Args:
        problem (Problem): 纯齐次 Neumann 问题（F = 0, g_N = 0）
        architecture (Architecture): 网络结构
        grid (TimeGrid): 时间网格
        config (JkoConfig): 求解配置
        checkpoint_dir (Optional[str]): 检查点目录
        resume (Optional[Trajectory]): 已完成的部分轨迹

    Returns:
        Trajectory: N_t + 1 个网络
    """
    if problem.domain.faces(DIRICHLET):
        raise ProblemError(f"JKO 求解只适用于纯 Neumann 问题，{problem.name} 含 Dirichlet 边界")
    if problem.flavor == "custom":
        get_training_logger().warning("自定义问题用 JKO 求解：假定 F = 0 且 g_N = 0")

    logger = get_training_logger()
    epsilon = config.resolved_epsilon(problem)
    trajectory = resume if resume is not None and resume.networks else Trajectory(grid)

    if not trajectory.networks:
        started = time.time()
        net, result = fit_initial(problem, architecture, config.initial, config.sampler, config.seed)
        record_step(trajectory, net, 0, 0.0, result, 0.0, time.time() - started, checkpoint_dir)

    nodes = grid.nodes
    for k in range(trajectory.last_step + 1, grid.count + 1):
        started = time.time()
        u_prev = trajectory.networks[k - 1]
        w = u_prev.clone()
        tau = grid.steps[k - 1]
        costs = {}
        clamp_events = [0]

        def loss_fn(epoch):
            clouds = config.sampler.clouds(k, epoch)
            key = epoch if config.sampler.fresh else 0
            if key not in costs:
                costs.clear()
                costs[key] = cost_matrix(clouds.interior)
            loss = jko_step_loss(
                w, u_prev, tau, clouds, epsilon, costs[key],
                tol=config.sinkhorn_tol,
                max_iters=config.sinkhorn_iters,
                use_divergence=config.divergence,
                entropy_normalization=config.entropy_normalization,
                mass_weight=config.mass_weight,
                floor=config.floor,
            )
            clamp_events[0] += loss.clamped
            return loss.surrogate, loss.value, {
                "ot_cost": loss.ot,
                "entropy": loss.entropy,
                "mass": loss.mass,
                "sinkhorn_iters": loss.state.iterations,
                "residual": loss.state.residual,
            }

        result = train_network(w, loss_fn, config.step, label=f"JKO u^{k}")
        if clamp_events[0]:
            logger.warning(f"第 {k} 步共有 {clamp_events[0]} 次密度截断到 {config.floor:.0e}")
        record_step(trajectory, w, k, nodes[k], result, 0.0, time.time() - started, checkpoint_dir)
        logger.info(f"JKO t = {nodes[k]:.4f} (第 {k}/{grid.count} 步): loss = {result.final_loss:.6e}")
    return trajectory

