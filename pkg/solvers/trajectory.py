# -*- coding: utf-8 -*-

"""
时间网格与解轨迹（逐时间步网络检查点 + 训练记录）
目录布局：
    u_0000.ckpt ... u_NNNN.ckpt   各时间步网络
    steps.csv                     每步一行：step, t, loss, epochs, gamma, stopped, runtime_s
    training_log.csv              每个 epoch 一行
"""

import math
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import pandas as pd

from NN.checkpoint import load_checkpoint, save_checkpoint
from solvers.training import TrainingError


@dataclass(frozen=True)
class TimeGrid:
    """时间剖分 0 = t_0 < t_1 < ... < t_{N_t} = T"""

    horizon: float
    steps: tuple

    def __post_init__(self):
        if not self.horizon > 0:
            raise TrainingError(f"时间区间长度必须为正: {self.horizon}")
        if not self.steps:
            raise TrainingError("时间步列表为空")
        if any(not tau > 0 for tau in self.steps):
            raise TrainingError(f"时间步长必须为正: {self.steps}")
        if abs(math.fsum(self.steps) - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise TrainingError(f"时间步长之和 {math.fsum(self.steps)} 不等于 T = {self.horizon}")

    @classmethod
    def uniform(cls, horizon: float, tau: float) -> "TimeGrid":
        """均匀步长 τ，要求 T/τ 为整数"""
        if not tau > 0:
            raise TrainingError(f"时间步长必须为正: {tau}")
        count = int(round(horizon / tau))
        if count < 1 or abs(count * tau - horizon) > 1e-9 * max(1.0, horizon):
            raise TrainingError(f"T = {horizon} 不能被 τ = {tau} 整除")
        return cls(float(horizon), (float(horizon) / count,) * count)

    @property
    def count(self) -> int:
        return len(self.steps)

    @property
    def nodes(self) -> List[float]:
        nodes = [0.0]
        for tau in self.steps:
            nodes.append(nodes[-1] + tau)
        nodes[-1] = self.horizon
        return nodes


@dataclass
class StepRecord:
    """单个时间步的训练诊断"""

    step: int
    t: float
    loss: float
    epochs: int
    gamma: float
    stopped: str
    runtime_s: float


@dataclass
class Trajectory:
    """u^0 ... u^{N_t}；未完成的轨迹只含前若干步"""

    grid: TimeGrid
    networks: list = field(default_factory=list)
    records: List[StepRecord] = field(default_factory=list)
    log: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def complete(self) -> bool:
        return len(self.networks) == self.grid.count + 1

    @property
    def last_step(self) -> int:
        return len(self.networks) - 1

    def append(self, network, record: StepRecord, log: Optional[pd.DataFrame] = None) -> None:
        if len(self.networks) > self.grid.count:
            raise TrainingError(f"轨迹已有 {len(self.networks)} 个网络，超出 N_t + 1 = {self.grid.count + 1}")
        self.networks.append(network)
        self.records.append(record)
        if log is not None and not log.empty:
            self.log = log if self.log.empty else pd.concat([self.log, log], ignore_index=True)

    def steps_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records])

    def save_step(self, directory: str, step: int) -> None:
        """写入第 step 个网络，并刷新 steps.csv / training_log.csv"""
        os.makedirs(directory, exist_ok=True)
        save_checkpoint(self.networks[step], checkpoint_path(directory, step))
        self.steps_frame().to_csv(os.path.join(directory, "steps.csv"), index=False)
        self.log.to_csv(os.path.join(directory, "training_log.csv"), index=False)

    @classmethod
    def load(cls, directory: str, grid: TimeGrid) -> "Trajectory":
        """
        读取目录中连续存在的检查点 u_0000, u_0001, ...

        Returns:
            Trajectory: 可能不完整，供断点续算
        """
        trajectory = cls(grid)
        steps_path = os.path.join(directory, "steps.csv")
        records = pd.read_csv(steps_path).to_dict("records") if os.path.exists(steps_path) else []
        for step in range(grid.count + 1):
            path = checkpoint_path(directory, step)
            if not os.path.exists(path) or step >= len(records):
                break
            trajectory.networks.append(load_checkpoint(path))
            trajectory.records.append(StepRecord(**records[step]))
        log_path = os.path.join(directory, "training_log.csv")
        if os.path.exists(log_path) and os.path.getsize(log_path) > 1:
            log = pd.read_csv(log_path)
            if "step" in log.columns:
                log = log[log["step"] <= trajectory.last_step].reset_index(drop=True)
            trajectory.log = log
        return trajectory


def checkpoint_path(directory: str, step: int) -> str:
    return os.path.join(directory, f"u_{step:04d}.ckpt")
