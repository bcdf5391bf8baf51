# -*- coding: utf-8 -*-

"""
精确（无正则）最优传输：传输多面体上的线性规划
min <P, C>  s.t.  P 1 = a,  Pᵀ 1 = b,  P >= 0
"""

import numpy as np
from scipy.optimize import linprog

from OT.sinkhorn import SinkhornError, SinkhornState


def exact_transport(a, b, cost):
    """
    用 HiGHS 求解传输线性规划

    Args:
        a: (n,) 源测度
        b: (m,) 目标测度
        cost: (n, m) 代价矩阵

    Returns:
        tuple: (最优值 W², 最优计划 (n, m) ndarray)
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    cost = np.asarray(cost, dtype=np.float64)
    n, m = a.size, b.size
    if cost.shape != (n, m):
        raise SinkhornError(f"代价矩阵形状 {cost.shape} 与测度长度 ({n}, {m}) 不符")

    rows = np.kron(np.eye(n), np.ones((1, m)))
    cols = np.kron(np.ones((1, n)), np.eye(m))
    # 两组约束线性相关，去掉最后一个列约束
    a_eq = np.vstack([rows, cols[:-1]])
    b_eq = np.concatenate([a, b[:-1]])
    result = linprog(cost.reshape(-1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not result.success:
        raise SinkhornError(f"传输线性规划求解失败: {result.message}")
    return float(result.fun), result.x.reshape(n, m)


def entropic_gap(state: SinkhornState, a, b) -> float:
    """熵正则计划的传输代价与精确 W² 之差"""
    value, _ = exact_transport(
        np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64), state.cost.numpy()
    )
    return state.transport_cost - value
