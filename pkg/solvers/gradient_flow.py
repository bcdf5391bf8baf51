# -*- coding: utf-8 -*-

"""
时间深度 Nitsche 法
u^0 拟合初值；对 k = 1..N_t，以 u^{k-1} 热启动，最小化
    L(w) = c·|Ω|/N_I Σ (w - u^{k-1})²(x_n) + τ_k · Ñ(w; γ)
其中 c 为 L2 权重（默认 1；0.5 对应变分形式），γ 由上一个 epoch 的参数计算。
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import torch

from NN.network import Architecture, init_xavier
from PDE.domain import CloudSampler, PointClouds
from PDE.nitsche import DiffusionSpec, PenaltyConfig, StepData, compute_penalty, nitsche_functional
from PDE.problems import Problem
from solvers.training import TrainingConfig, TrainingResult, train_network
from solvers.trajectory import StepRecord, TimeGrid, Trajectory
from utils.logger import get_training_logger


@dataclass(frozen=True)
class GradientFlowConfig:
    """梯度流求解配置"""

    initial: TrainingConfig
    step: TrainingConfig
    sampler: CloudSampler = field(compare=False)
    penalty: PenaltyConfig = PenaltyConfig()
    l2_weight: float = 1.0
    seed: int = 0


def initial_loss(w, problem: Problem, clouds: PointClouds) -> torch.Tensor:
    """|Ω|/N_I Σ (w - u_0)²，只对网络求值，不涉及空间导数"""
    residual = w(clouds.interior) - problem.initial(clouds.interior)
    return clouds.integrate("interior", residual * residual)


def fit_initial(
    problem: Problem,
    architecture: Architecture,
    training: TrainingConfig,
    sampler: CloudSampler,
    seed: int = 0,
    network=None,
):
    """
    拟合初值 u_0

    Args:
        problem (Problem): 问题
        architecture (Architecture): 网络结构（未给 network 时 Xavier 初始化）
        training (TrainingConfig): 训练预算与学习率表
        sampler (CloudSampler): 点云（第 0 步）
        seed (int): 初始化种子
        network: 可选，直接训练给定模型

    Returns:
        tuple: (网络, TrainingResult)
    """
    net = init_xavier(architecture, seed) if network is None else network

    def loss_fn(epoch):
        loss = initial_loss(net, problem, sampler.clouds(0, epoch))
        return loss, float(loss), {}

    result = train_network(net, loss_fn, training, label="u^0")
    return net, result


def step_loss(
    w,
    u_prev,
    tau: float,
    clouds: PointClouds,
    penalty_values: torch.Tensor,
    data: StepData,
    diffusion: DiffusionSpec,
    l2_weight: float = 1.0,
) -> torch.Tensor:
    """
    单个时间步的损失

    Args:
        w: 当前网络
        u_prev: 上一步网络（冻结）
        tau (float): 步长 τ_k
        clouds (PointClouds): 点云
        penalty_values (torch.Tensor): 罚参数 γ（常数）
        data (StepData): t_k 时刻的 F、g_D、g_N
        diffusion (DiffusionSpec): 扩散张量
        l2_weight (float): L2 项权重

    Returns:
        torch.Tensor: 标量损失
    """
    with torch.no_grad():
        previous = u_prev(clouds.interior)
    diff = w(clouds.interior) - previous
    l2 = l2_weight * clouds.integrate("interior", diff * diff)
    if tau == 0:
        return l2
    return l2 + tau * nitsche_functional(w, penalty_values, clouds, data, diffusion)


def train_step(
    problem: Problem,
    u_prev,
    step: int,
    t: float,
    tau: float,
    config: GradientFlowConfig,
):
    """
    训练第 step 个时间步的网络（u^{k-1} 的副本上原地训练）

    Returns:
        tuple: (网络, TrainingResult, 最后使用的 γ 最大值)
    """
    w = u_prev.clone()
    # θ_{m-1}：第一个 epoch 用热启动参数
    lagged = u_prev.clone()
    last_gamma = [0.0]

    def loss_fn(epoch):
        clouds = config.sampler.clouds(step, epoch)
        gamma = compute_penalty(lagged, clouds, config.penalty, problem.diffusion)
        lagged.load_flat(w.flat())
        data = problem.step_data(t, clouds)
        loss = step_loss(w, u_prev, tau, clouds, gamma, data, problem.diffusion, config.l2_weight)
        last_gamma[0] = float(gamma.max()) if gamma.numel() else 0.0
        return loss, float(loss), {"gamma": last_gamma[0]}

    result = train_network(w, loss_fn, config.step, label=f"u^{step}")
    return w, result, last_gamma[0]


def solve(
    problem: Problem,
    architecture: Architecture,
    grid: TimeGrid,
    config: GradientFlowConfig,
    checkpoint_dir: Optional[str] = None,
    resume: Optional[Trajectory] = None,
) -> Trajectory:
    """
    逐时间步求解

    Args:
        problem (Problem): 问题
        architecture (Architecture): 网络结构
        grid (TimeGrid): 时间网格
        config (GradientFlowConfig): 求解配置
        checkpoint_dir (Optional[str]): 每完成一步即写入检查点
        resume (Optional[Trajectory]): 已完成的部分轨迹

    Returns:
        Trajectory: N_t + 1 个网络
    """
    logger = get_training_logger()
    trajectory = resume if resume is not None and resume.networks else Trajectory(grid)

    if not trajectory.networks:
        started = time.time()
        net, result = fit_initial(problem, architecture, config.initial, config.sampler, config.seed)
        record_step(trajectory, net, 0, 0.0, result, 0.0, time.time() - started, checkpoint_dir)
    else:
        logger.info(f"从第 {trajectory.last_step} 步的检查点继续")

    nodes = grid.nodes
    for k in range(trajectory.last_step + 1, grid.count + 1):
        started = time.time()
        net, result, gamma = train_step(problem, trajectory.networks[k - 1], k, nodes[k], grid.steps[k - 1], config)
        record_step(trajectory, net, k, nodes[k], result, gamma, time.time() - started, checkpoint_dir)
        logger.info(f"t = {nodes[k]:.4f} (第 {k}/{grid.count} 步): loss = {result.final_loss:.6e}, γ = {gamma:.3e}")
    return trajectory


def record_step(trajectory, net, step, t, result: TrainingResult, gamma, runtime, checkpoint_dir=None):
    """把一步的网络与诊断追加到轨迹，并按需写检查点"""
    record = StepRecord(
        step=step,
        t=t,
        loss=result.final_loss,
        epochs=result.epochs_run,
        gamma=gamma,
        stopped=result.stopped,
        runtime_s=runtime,
    )
    trajectory.append(net, record, result.frame(step=step))
    if checkpoint_dir:
        trajectory.save_step(checkpoint_dir, step)
