# -*- coding: utf-8 -*-

"""
DGM 时空最小二乘基线
单个网络 w(t, x)（输入维 d+1，时间在第 0 列）最小化
    T|Ω|/N Σ (∂_t w - λΔw - F)²  +  T|Γ_D|/N_D Σ (w - g_D)²
    + T|Γ_N|/N_N Σ (λ n·∇w - g_N)²  +  |Ω|/N_0 Σ (w(0,·) - u_0)²
"""

import os
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import pandas as pd
import torch
import yaml

from NN.autodiff import DTYPE
from NN.checkpoint import load_checkpoint, save_checkpoint
from NN.network import Architecture, init_xavier
from PDE.domain import DIRICHLET, NEUMANN, BoxDomain, SamplingError, mix_seed, sample_clouds, sample_interior
from PDE.problems import Problem, ProblemError
from solvers.training import TrainingConfig, TrainingResult, train_network
from utils.logger import get_app_logger, get_training_logger

CHECKPOINT_NAME = "dgm.ckpt"
STATE_NAME = "dgm_state.yaml"


@dataclass(frozen=True)
class SpaceTimeCloud:
    """时空点云；所有 (t, x) 点的时间坐标在 (0, T] 内"""

    domain: BoxDomain
    horizon: float
    interior: torch.Tensor
    dirichlet: torch.Tensor
    neumann: torch.Tensor
    neumann_normals: torch.Tensor
    initial: torch.Tensor

    def weight(self, region: str) -> float:
        """Monte Carlo 权重"""
        points = {"interior": self.interior, DIRICHLET: self.dirichlet, NEUMANN: self.neumann}[region]
        if points.shape[0] == 0:
            return 0.0
        return self.horizon * self.domain.measure(region) / points.shape[0]


def _times(count: int, horizon: float, generator: torch.Generator) -> torch.Tensor:
    # 1 - U 落在 (0, 1]
    return horizon * (1.0 - torch.rand(count, 1, generator=generator, dtype=DTYPE))


def sample_space_time(
    domain: BoxDomain,
    horizon: float,
    n_interior: int,
    per_face: int,
    n_initial: int,
    seed: int = 0,
) -> SpaceTimeCloud:
    """
    采样时空点云

    Args:
        domain (BoxDomain): 空间区域
        horizon (float): T
        n_interior (int): (0,T]×Ω 内部点数
        per_face (int): (0,T]×每个面的点数
        n_initial (int): t = 0 的点数
        seed (int): 随机种子

    Returns:
        SpaceTimeCloud: 时空点云
    """
    if n_initial < 1:
        raise SamplingError(f"初值点数必须 >= 1: {n_initial}")
    if not horizon > 0:
        raise SamplingError(f"T 必须为正: {horizon}")
    generator = torch.Generator().manual_seed(int(seed))
    spatial = sample_clouds(domain, n_interior, per_face, generator=generator)

    def lift(points):
        return torch.cat([_times(points.shape[0], horizon, generator), points], dim=1)

    return SpaceTimeCloud(
        domain=domain,
        horizon=float(horizon),
        interior=lift(spatial.interior),
        dirichlet=lift(spatial.dirichlet),
        neumann=lift(spatial.neumann),
        neumann_normals=spatial.neumann_normals,
        initial=sample_interior(domain, n_initial, generator),
    )


def _isotropic_scale(problem: Problem) -> float:
    if not problem.diffusion.is_isotropic:
        raise ProblemError("DGM 残差只支持 A = λI 的各向同性扩散")
    return problem.diffusion.lambda_max


def dgm_terms(w, cloud: SpaceTimeCloud, problem: Problem) -> Dict[str, torch.Tensor]:
    """
    DGM 损失的各项

    Returns:
        dict: interior / dirichlet / neumann / initial
    """
    lam = _isotropic_scale(problem)
    d = problem.dim
    spatial = range(1, d + 1)

    jet = w.jet(cloud.interior, 2, trace_dims=spatial)
    t, x = cloud.interior[:, 0], cloud.interior[:, 1:]
    residual = jet.grad[:, 0] - lam * jet.lap - problem.forcing(t, x)
    terms = {"interior": cloud.weight("interior") * torch.sum(residual * residual)}

    zero = torch.zeros((), dtype=DTYPE)
    if cloud.dirichlet.shape[0]:
        jump = w(cloud.dirichlet) - problem.dirichlet(cloud.dirichlet[:, 0], cloud.dirichlet[:, 1:])
        terms[DIRICHLET] = cloud.weight(DIRICHLET) * torch.sum(jump * jump)
    else:
        terms[DIRICHLET] = zero

    if cloud.neumann.shape[0]:
        flux_jet = w.jet(cloud.neumann, 1)
        flux = lam * torch.sum(flux_jet.grad[:, 1:] * cloud.neumann_normals, dim=1)
        mismatch = flux - problem.neumann(cloud.neumann[:, 0], cloud.neumann[:, 1:], cloud.neumann_normals)
        terms[NEUMANN] = cloud.weight(NEUMANN) * torch.sum(mismatch * mismatch)
    else:
        terms[NEUMANN] = zero

    start = torch.cat([torch.zeros(cloud.initial.shape[0], 1, dtype=DTYPE), cloud.initial], dim=1)
    initial = w(start) - problem.initial(cloud.initial)
    terms["initial"] = cloud.domain.volume / cloud.initial.shape[0] * torch.sum(initial * initial)
    return terms


def dgm_loss(w, cloud: SpaceTimeCloud, problem: Problem) -> torch.Tensor:
    """各项等权之和，恒 >= 0"""
    return sum(dgm_terms(w, cloud, problem).values())


@dataclass(frozen=True)
class DgmConfig:
    """DGM 训练配置"""

    training: TrainingConfig
    n_interior: int
    per_face: int
    n_initial: int
    fresh: bool = True
    seed: int = 0
    checkpoint_every: int = 1000


@dataclass
class DgmResult:
    network: object
    training: TrainingResult
    log: pd.DataFrame = field(default_factory=pd.DataFrame)


def solve_dgm(
    problem: Problem,
    architecture: Architecture,
    config: DgmConfig,
    checkpoint_dir: Optional[str] = None,
    resume: bool = False,
) -> DgmResult:
    """
    训练单个时空网络

    Args:
        problem (Problem): 问题
        architecture (Architecture): 输入维须为 d + 1
        config (DgmConfig): 训练配置
        checkpoint_dir (Optional[str]): 周期性检查点目录
        resume (bool): 从检查点和 dgm_state.yaml 继续

    Returns:
        DgmResult: 网络与训练记录
    """
    if architecture.input_dim != problem.dim + 1:
        raise ProblemError(f"DGM 网络输入维应为 d + 1 = {problem.dim + 1}，实际 {architecture.input_dim}")
    _isotropic_scale(problem)
    if architecture.activation == "relu":
        get_training_logger().warning("DGM 使用 ReLU：其拉普拉斯几乎处处为零，残差中的扩散项失效")

    start_epoch = 1
    previous_log = pd.DataFrame()
    net = None
    if resume and checkpoint_dir:
        net, start_epoch, previous_log = _load_state(checkpoint_dir)
    if net is None:
        net = init_xavier(architecture, config.seed)

    cache = {}

    def cloud_for(epoch):
        key = epoch if config.fresh else 0
        if key not in cache:
            cache.clear()
            cache[key] = sample_space_time(
                problem.domain, problem.horizon, config.n_interior, config.per_face, config.n_initial,
                seed=mix_seed(config.seed, 0, key),
            )
        return cache[key]

    def loss_fn(epoch):
        terms = dgm_terms(net, cloud_for(epoch), problem)
        loss = sum(terms.values())
        return loss, float(loss), {name: float(value) for name, value in terms.items()}

    history = []

    def on_epoch(epoch, record):
        history.append(record)
        if checkpoint_dir and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            _save_state(checkpoint_dir, net, epoch, previous_log, history)

    started = time.time()
    result = train_network(net, loss_fn, config.training, label="DGM", start_epoch=start_epoch, on_epoch=on_epoch)
    log = result.frame(step=0)
    if not previous_log.empty:
        log = pd.concat([previous_log, log], ignore_index=True)
    if checkpoint_dir:
        _save_state(checkpoint_dir, net, start_epoch + result.epochs_run - 1, previous_log, history)
    get_app_logger().info(f"DGM 训练完成，用时 {time.time() - started:.1f}s")
    return DgmResult(net, result, log)


def _save_state(directory, net, epoch, previous_log, history):
    os.makedirs(directory, exist_ok=True)
    save_checkpoint(net, os.path.join(directory, CHECKPOINT_NAME))
    frame = pd.DataFrame(history)
    if not frame.empty:
        frame.insert(0, "step", 0)
    log = pd.concat([previous_log, frame], ignore_index=True) if not previous_log.empty else frame
    log.to_csv(os.path.join(directory, "training_log.csv"), index=False)
    with open(os.path.join(directory, STATE_NAME), "w", encoding="utf-8") as file:
        yaml.safe_dump({"epoch": int(epoch)}, file)


def _load_state(directory):
    state_path = os.path.join(directory, STATE_NAME)
    checkpoint = os.path.join(directory, CHECKPOINT_NAME)
    if not (os.path.exists(state_path) and os.path.exists(checkpoint)):
        get_app_logger().info(f"{directory} 中没有 DGM 检查点，从头训练")
        return None, 1, pd.DataFrame()
    with open(state_path, "r", encoding="utf-8") as file:
        epoch = int(yaml.safe_load(file)["epoch"])
    log_path = os.path.join(directory, "training_log.csv")
    log = pd.read_csv(log_path) if os.path.exists(log_path) and os.path.getsize(log_path) > 1 else pd.DataFrame()
    if not log.empty:
        log = log[log["epoch"] <= epoch].reset_index(drop=True)
    get_app_logger().info(f"DGM 从第 {epoch} 个 epoch 的检查点继续")
    return load_checkpoint(checkpoint), epoch + 1, log
