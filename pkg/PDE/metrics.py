# -*- coding: utf-8 -*-

"""
误差指标
在每个时间节点 t_1..t_{N_t} 上取 N_test 个带种子的均匀测试点，所有时空测试点合并计算：
    相对 L2 误差 = sqrt(Σ(u - û)² / Σu²)
    最大误差     = max|u - û|
    平均误差     = mean|u - û|
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import pandas as pd
import torch

from NN.autodiff import DTYPE
from PDE.domain import sample_interior
from PDE.problems import Problem
from utils.logger import get_app_logger

DEFAULT_TEST_POINTS = 4096

# 结果表的列名
TABLE_COLUMNS = ["d", "L2 relative error", "max error", "mean error"]
REPORT_COLUMNS = ["method", *TABLE_COLUMNS, "n_test", "time_nodes", "seed", "runtime_s"]
PER_TIME_COLUMNS = ["method", "d", "t", "L2 relative error", "max error", "mean error"]

# predict(k, t_k, x) -> (N,) 近似解在第 k 个时间节点的取值
Predictor = Callable[[int, float, torch.Tensor], torch.Tensor]


@dataclass
class ErrorReport:
    """误差报告：汇总行（每个维度一行）与按时间节点的误差曲线"""

    rows: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=REPORT_COLUMNS))
    per_time: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=PER_TIME_COLUMNS))

    def to_csv(self, path: str, per_time_path: str = None) -> None:
        self.rows.to_csv(path, index=False)
        if per_time_path:
            self.per_time.to_csv(per_time_path, index=False)

    @classmethod
    def from_csv(cls, path: str, per_time_path: str = None) -> "ErrorReport":
        rows = pd.read_csv(path)
        per_time = pd.read_csv(per_time_path) if per_time_path else pd.DataFrame(columns=PER_TIME_COLUMNS)
        return cls(rows, per_time)

    def table(self) -> pd.DataFrame:
        """只保留结果表四列"""
        return self.rows[TABLE_COLUMNS].reset_index(drop=True)

    @classmethod
    def concat(cls, reports: Sequence["ErrorReport"]) -> "ErrorReport":
        if not reports:
            return cls()
        return cls(
            pd.concat([r.rows for r in reports], ignore_index=True),
            pd.concat([r.per_time for r in reports], ignore_index=True),
        )


def _errors(exact: torch.Tensor, approx: torch.Tensor) -> dict:
    diff = (exact - approx).abs()
    norm = float(torch.sum(exact ** 2))
    relative = math.sqrt(float(torch.sum(diff ** 2)) / norm) if norm > 0 else float("nan")
    return {
        "L2 relative error": relative,
        "max error": float(diff.max()),
        "mean error": float(diff.mean()),
    }


def sample_test_points(problem: Problem, nodes: Sequence[float], n_test: int, seed: int) -> list:
    """每个时间节点一组测试点，同一 seed 下完全确定"""
    generator = torch.Generator().manual_seed(int(seed))
    return [sample_interior(problem.domain, n_test, generator) for _ in nodes]


def evaluate(
    predict: Predictor,
    problem: Problem,
    nodes: Sequence[float],
    n_test: int = DEFAULT_TEST_POINTS,
    seed: int = 1234,
    method: str = "",
    runtime: float = float("nan"),
) -> ErrorReport:
    """
    在时空测试集上比较近似解与精确解

    Args:
        predict (Predictor): 近似解，predict(k, t_k, x)，k 从 1 开始
        problem (Problem): 带精确解的问题
        nodes (Sequence[float]): 时间节点 t_1..t_{N_t}
        n_test (int): 每个节点的测试点数
        seed (int): 测试点随机种子
        method (str): 方法名（写入报告）
        runtime (float): 求解耗时（秒）

    Returns:
        ErrorReport: 汇总误差及按时间的误差
    """
    exact_fn = problem.require_exact()
    exact_all, approx_all, per_time = [], [], []
    with torch.no_grad():
        for k, (t, x) in enumerate(zip(nodes, sample_test_points(problem, nodes, n_test, seed)), start=1):
            exact = exact_fn(float(t), x)
            approx = torch.as_tensor(predict(k, float(t), x), dtype=DTYPE).reshape(-1)
            exact_all.append(exact)
            approx_all.append(approx)
            per_time.append({"method": method, "d": problem.dim, "t": float(t), **_errors(exact, approx)})

    summary = _errors(torch.cat(exact_all), torch.cat(approx_all))
    rows = pd.DataFrame(
        [{
            "method": method,
            "d": problem.dim,
            **summary,
            "n_test": n_test,
            "time_nodes": len(nodes),
            "seed": seed,
            "runtime_s": runtime,
        }],
        columns=REPORT_COLUMNS,
    )
    get_app_logger().info(
        f"{method or '解'} d={problem.dim}: 相对 L2 {summary['L2 relative error']:.3e}, "
        f"最大 {summary['max error']:.3e}, 平均 {summary['mean error']:.3e}"
    )
    return ErrorReport(rows, pd.DataFrame(per_time, columns=PER_TIME_COLUMNS))


def trajectory_predictor(networks: Sequence) -> Predictor:
    """逐时间步网络 u^0..u^{N_t} 的预测函数"""

    def predict(k, t, x):
        return networks[k](x)

    return predict


def space_time_predictor(network) -> Predictor:
    """单个时空网络 w(t, x) 的预测函数"""

    def predict(k, t, x):
        tx = torch.cat([torch.full((x.shape[0], 1), t, dtype=DTYPE), x], dim=1)
        return network(tx)

    return predict
