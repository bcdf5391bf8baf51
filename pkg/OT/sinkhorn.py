# -*- coding: utf-8 -*-

"""
对数域 Sinkhorn-Knopp 熵正则最优传输

对偶势 f, g 取相对 a⊗b 的形式：
    g_j = -ε · logsumexp_i(log a_i + (f_i - C_ij) / ε)
    f_i = -ε · logsumexp_j(log b_j + (g_j - C_ij) / ε)
    P_ij = a_i b_j exp((f_i + g_j - C_ij) / ε)
收敛时 OT_ε(a, b) = <P, C> + ε KL(P | a⊗b) = <f, a> + <g, b>，且 ∂OT_ε/∂b = g。
"""

from dataclasses import dataclass

import torch

from NN.autodiff import DTYPE
from utils.logger import get_training_logger


class SinkhornError(Exception):
    """Sinkhorn 输入或迭代异常"""

    pass


@dataclass(frozen=True)
class SinkhornState:
    """
    一次 Sinkhorn 求解的结果快照

    f, g: 对偶势（即缩放向量的对数乘以 ε）
    plan: 传输计划 P
    transport_cost: <P, C>
    objective: 正则化目标 OT_ε = <f, a> + <g, b>
    residual: 计划行和、列和与 a、b 的最大偏差
    """

    cost: torch.Tensor
    epsilon: float
    f: torch.Tensor
    g: torch.Tensor
    plan: torch.Tensor
    transport_cost: float
    objective: float
    iterations: int
    residual: float
    converged: bool

    @property
    def scalings(self):
        """缩放向量 (u, v)，P = diag(a·u) K diag(b·v)，K = exp(-C/ε)"""
        return torch.exp(self.f / self.epsilon), torch.exp(self.g / self.epsilon)


def cost_matrix(x: torch.Tensor, y: torch.Tensor = None) -> torch.Tensor:
    """平方欧氏距离 C_ij = |x_i - y_j|²"""
    y = x if y is None else y
    return torch.cdist(x, y, compute_mode="donot_use_mm_for_euclid_dist") ** 2


def _check_measure(weights: torch.Tensor, name: str) -> torch.Tensor:
    weights = torch.as_tensor(weights, dtype=DTYPE).detach().reshape(-1)
    if weights.numel() == 0:
        raise SinkhornError(f"测度 {name} 为空")
    if bool((weights < 0).any()) or not bool(torch.isfinite(weights).all()):
        raise SinkhornError(f"测度 {name} 含负值或非有限值")
    total = float(weights.sum())
    if abs(total - 1.0) > 1e-9:
        raise SinkhornError(f"测度 {name} 的总质量为 {total}，应为 1")
    return weights


def _plan(log_a, log_b, f, g, cost, epsilon):
    return torch.exp(log_a[:, None] + log_b[None, :] + (f[:, None] + g[None, :] - cost) / epsilon)


def sinkhorn(
    a: torch.Tensor,
    b: torch.Tensor,
    cost: torch.Tensor,
    epsilon: float,
    tol: float = 1e-9,
    max_iters: int = 10000,
) -> SinkhornState:
    """
    对数域 Sinkhorn 迭代

    Args:
        a (torch.Tensor): (n,) 源测度权重，和为 1
        b (torch.Tensor): (m,) 目标测度权重，和为 1
        cost (torch.Tensor): (n, m) 代价矩阵
        epsilon (float): 正则化参数 ε > 0
        tol (float): 最大边缘残差阈值
        max_iters (int): 迭代上限

    Returns:
        SinkhornState: 达到上限时 converged = False
    """
    if epsilon <= 0:
        raise SinkhornError(f"ε 必须为正: {epsilon}")
    a = _check_measure(a, "a")
    b = _check_measure(b, "b")
    cost = torch.as_tensor(cost, dtype=DTYPE).detach()
    if cost.shape != (a.numel(), b.numel()):
        raise SinkhornError(f"代价矩阵形状 {tuple(cost.shape)} 与测度长度 ({a.numel()}, {b.numel()}) 不符")

    with torch.no_grad():
        log_a, log_b = torch.log(a), torch.log(b)
        f = torch.zeros_like(a)
        g = torch.zeros_like(b)
        residual = float("inf")
        iterations = 0
        for iterations in range(1, max_iters + 1):
            g = -epsilon * torch.logsumexp(log_a[:, None] + (f[:, None] - cost) / epsilon, dim=0)
            f = -epsilon * torch.logsumexp(log_b[None, :] + (g[None, :] - cost) / epsilon, dim=1)
            # f 刚更新，行和精确等于 a，只需检查列和
            plan = _plan(log_a, log_b, f, g, cost, epsilon)
            residual = float((plan.sum(dim=0) - b).abs().max())
            if residual < tol:
                break

        plan = _plan(log_a, log_b, f, g, cost, epsilon)
        residual = max(residual, float((plan.sum(dim=1) - a).abs().max()))
        converged = residual < tol
        # 零质量原子上的势不参与目标
        objective = float(torch.sum(torch.where(a > 0, f * a, torch.zeros_like(a)))) + float(
            torch.sum(torch.where(b > 0, g * b, torch.zeros_like(b)))
        )
        transport_cost = float(torch.sum(plan * cost))

    if not converged:
        get_training_logger().warning(
            f"Sinkhorn 在 {iterations} 次迭代后未收敛: 边缘残差 {residual:.3e} >= {tol:.1e} (ε = {epsilon:.3e})"
        )
    return SinkhornState(cost, epsilon, f, g, plan, transport_cost, objective, iterations, residual, converged)


def divergence(
    a: torch.Tensor,
    b: torch.Tensor,
    cost: torch.Tensor,
    epsilon: float,
    tol: float = 1e-9,
    max_iters: int = 10000,
):
    """
    Sinkhorn 散度 S_ε(a, b) = OT_ε(a, b) - ½OT_ε(a, a) - ½OT_ε(b, b)

    Returns:
        tuple: (S_ε 值, 对 b 的梯度 g_ab - p_bb, 三个 SinkhornState)
    """
    ab = sinkhorn(a, b, cost, epsilon, tol, max_iters)
    aa = sinkhorn(a, a, cost, epsilon, tol, max_iters)
    bb = sinkhorn(b, b, cost, epsilon, tol, max_iters)
    value = ab.objective - 0.5 * aa.objective - 0.5 * bb.objective
    # 对称问题收敛时 f = g，取两者平均抑制迭代误差
    p_bb = 0.5 * (bb.f + bb.g)
    return value, ab.g - p_bb, (ab, aa, bb)
