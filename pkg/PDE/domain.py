# -*- coding: utf-8 -*-

"""
超立方体区域、边界划分、均匀点云采样、Monte Carlo 积分与最近内部点匹配
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import pandas as pd
import torch

from NN.autodiff import DTYPE
from utils.logger import get_training_logger

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
REGIONS = ("interior", DIRICHLET, NEUMANN)


class SamplingError(Exception):
    """采样或积分异常"""

    pass


@dataclass(frozen=True)
class BoxDomain:
    """
    盒形区域 Π[a_i, b_i]
    面的编号：2i 为 x_i = a_i（外法向 -e_i），2i+1 为 x_i = b_i（外法向 +e_i）
    """

    lower: tuple
    upper: tuple
    labels: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise SamplingError("上下界维数不一致或为空")
        for i, (a, b) in enumerate(zip(self.lower, self.upper)):
            if not a < b:
                raise SamplingError(f"第 {i} 个坐标区间无效: [{a}, {b}]")
        if len(self.labels) != 2 * self.dim:
            raise SamplingError(f"边界标签数应为 {2 * self.dim}，实际 {len(self.labels)}")
        for label in self.labels:
            if label not in (DIRICHLET, NEUMANN):
                raise SamplingError(f"未知边界标签 {label}")

    @classmethod
    def unit(cls, dim: int, label: str = DIRICHLET) -> "BoxDomain":
        """[0,1]^d，所有面使用同一标签"""
        return cls((0.0,) * dim, (1.0,) * dim, (label,) * (2 * dim))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> torch.Tensor:
        return torch.tensor(self.upper, dtype=DTYPE) - torch.tensor(self.lower, dtype=DTYPE)

    @property
    def volume(self) -> float:
        return float(torch.prod(self.widths))

    @property
    def diameter_squared(self) -> float:
        return float(torch.sum(self.widths ** 2))

    def face_measure(self, face: int) -> float:
        """第 face 个面的 (d-1) 维体积；d = 1 时面为点，测度取 1"""
        widths = self.widths
        axis = face // 2
        return float(torch.prod(torch.cat([widths[:axis], widths[axis + 1:]])))

    def faces(self, label: str) -> list:
        return [f for f, lab in enumerate(self.labels) if lab == label]

    def measure(self, region: str) -> float:
        """区域测度 |Ω|、|Γ_D| 或 |Γ_N|"""
        if region == "interior":
            return self.volume
        return float(sum(self.face_measure(f) for f in self.faces(region)))

    def contains(self, points: torch.Tensor) -> torch.Tensor:
        """严格内部判定"""
        lo = torch.tensor(self.lower, dtype=DTYPE)
        hi = torch.tensor(self.upper, dtype=DTYPE)
        return ((points > lo) & (points < hi)).all(dim=1)


@dataclass(frozen=True)
class PointClouds:
    """内部/Dirichlet/Neumann 点云及其 Monte Carlo 权重所需的区域测度"""

    domain: BoxDomain
    interior: torch.Tensor
    dirichlet: torch.Tensor
    dirichlet_normals: torch.Tensor
    neumann: torch.Tensor
    neumann_normals: torch.Tensor

    def points(self, region: str) -> torch.Tensor:
        return {"interior": self.interior, DIRICHLET: self.dirichlet, NEUMANN: self.neumann}[region]

    def count(self, region: str) -> int:
        return self.points(region).shape[0]

    def weight(self, region: str) -> float:
        """Monte Carlo 权重 |region| / N"""
        n = self.count(region)
        return self.domain.measure(region) / n if n else 0.0

    def integrate(self, region: str, values: torch.Tensor) -> torch.Tensor:
        """见 mc_integral"""
        return mc_integral(self, region, values)

    def to_frame(self) -> pd.DataFrame:
        """导出为 DataFrame（列: region, x1..xd, n1..nd），便于写 CSV 调试"""
        d = self.domain.dim
        frames = []
        for region in REGIONS:
            pts = self.points(region)
            if region == "interior":
                normals = torch.full_like(pts, float("nan"))
            else:
                normals = self.dirichlet_normals if region == DIRICHLET else self.neumann_normals
            frame = pd.DataFrame(pts.numpy(), columns=[f"x{i + 1}" for i in range(d)])
            frame[[f"n{i + 1}" for i in range(d)]] = normals.numpy()
            frame.insert(0, "region", region)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)


def _uniform_open(shape, generator: torch.Generator) -> torch.Tensor:
    # (0,1) 上的均匀数，剔除恰好为 0 的样本
    u = torch.rand(shape, generator=generator, dtype=DTYPE)
    while True:
        zero = u == 0.0
        if not zero.any():
            return u
        u[zero] = torch.rand(int(zero.sum()), generator=generator, dtype=DTYPE)


def sample_interior(domain: BoxDomain, count: int, generator: torch.Generator) -> torch.Tensor:
    """区域内部的均匀独立样本"""
    lo = torch.tensor(domain.lower, dtype=DTYPE)
    return lo + domain.widths * _uniform_open((count, domain.dim), generator)


def sample_faces(domain: BoxDomain, faces: Sequence[int], per_face: int, generator: torch.Generator):
    """
    在给定面上均匀采样

    Returns:
        tuple: (points (n, d), outward normals (n, d))
    """
    d = domain.dim
    points, normals = [], []
    for face in faces:
        axis, upper = divmod(face, 2)
        pts = sample_interior(domain, per_face, generator)
        pts[:, axis] = domain.upper[axis] if upper else domain.lower[axis]
        normal = torch.zeros(per_face, d, dtype=DTYPE)
        normal[:, axis] = 1.0 if upper else -1.0
        points.append(pts)
        normals.append(normal)
    if not points:
        return torch.zeros(0, d, dtype=DTYPE), torch.zeros(0, d, dtype=DTYPE)
    return torch.cat(points), torch.cat(normals)


def sample_clouds(
    domain: BoxDomain,
    n_interior: int,
    per_face: int,
    seed: Optional[int] = None,
    generator: Optional[torch.Generator] = None,
) -> PointClouds:
    """
    生成一组点云（"每条边界边" 理解为超立方体的 2d 个面）

    Args:
        domain (BoxDomain): 区域
        n_interior (int): 内部点数
        per_face (int): 每个面的点数
        seed (Optional[int]): 随机种子（未给 generator 时使用）
        generator (Optional[torch.Generator]): 连续采样时复用的随机数发生器

    Returns:
        PointClouds: 点云；对应标签没有面时边界点云为空
    """
    if n_interior < 1:
        raise SamplingError(f"内部区域测度为 {domain.volume}，点数必须 >= 1，实际 {n_interior}")
    if per_face < 1:
        raise SamplingError(f"每个边界面的测度为正，点数必须 >= 1，实际 {per_face}")
    if generator is None:
        generator = torch.Generator().manual_seed(0 if seed is None else int(seed))

    interior = sample_interior(domain, n_interior, generator)
    dirichlet, dirichlet_normals = sample_faces(domain, domain.faces(DIRICHLET), per_face, generator)
    neumann, neumann_normals = sample_faces(domain, domain.faces(NEUMANN), per_face, generator)
    return PointClouds(domain, interior, dirichlet, dirichlet_normals, neumann, neumann_normals)


def mc_integral(clouds: PointClouds, region: str, values: torch.Tensor) -> torch.Tensor:
    """
    Monte Carlo 积分 (|region| / N) Σ values

    Args:
        clouds (PointClouds): 点云
        region (str): interior / dirichlet / neumann
        values (torch.Tensor): 每个点上的被积函数值（可以在计算图上）

    Returns:
        torch.Tensor: 标量积分值；空区域返回 0
    """
    if region not in REGIONS:
        raise SamplingError(f"未知区域 {region}")
    n = clouds.count(region)
    values = torch.as_tensor(values, dtype=DTYPE).reshape(-1)
    if values.numel() != n:
        raise SamplingError(f"{region} 区域有 {n} 个点，被积函数值却有 {values.numel()} 个")
    if n == 0:
        return torch.zeros((), dtype=DTYPE)
    return clouds.domain.measure(region) / n * torch.sum(values)


@dataclass(frozen=True)
class Matching:
    """
    边界点 -> 内部点的匹配
    indices[n] 为第 n 个边界点匹配到的内部点下标，无效时为 -1
    exhausted: 可用内部点不足，匹配池被重新填充过（每一轮内仍为单射）
    """

    indices: torch.Tensor
    exhausted: bool
    valid: bool


def match_nearest_interior(
    boundary: torch.Tensor,
    interior: torch.Tensor,
    interior_grad_norms: torch.Tensor,
) -> Matching:
    """
    为每个边界点（按采样顺序）选取欧氏距离最近、梯度非零且尚未被选取的内部点；
    距离相同时取下标最小者。

    Args:
        boundary (torch.Tensor): (N_D, d) 边界点
        interior (torch.Tensor): (N_I, d) 内部点
        interior_grad_norms (torch.Tensor): (N_I,) 内部点上的 |∇w|

    Returns:
        Matching: 匹配结果
    """
    n_boundary = boundary.shape[0]
    if interior_grad_norms.numel() != interior.shape[0]:
        raise SamplingError(
            f"内部点 {interior.shape[0]} 个，梯度范数却有 {interior_grad_norms.numel()} 个"
        )

    candidates = interior_grad_norms.detach().reshape(-1) != 0
    n_valid = int(candidates.sum())
    indices = torch.full((n_boundary,), -1, dtype=torch.long)
    if n_boundary == 0:
        return Matching(indices, exhausted=False, valid=True)
    if n_valid == 0:
        get_training_logger().warning("没有梯度非零的内部点，罚参数将使用下限回退值")
        return Matching(indices, exhausted=True, valid=False)

    distances = torch.cdist(boundary, interior, compute_mode="donot_use_mm_for_euclid_dist")
    blocked = ~candidates
    distances[:, blocked] = float("inf")

    available = candidates.clone()
    exhausted = False
    for n in range(n_boundary):
        if not available.any():
            # 新一轮：重新开放全部有效点
            available = candidates.clone()
            exhausted = True
        row = torch.where(available, distances[n], torch.full_like(distances[n], float("inf")))
        j = int(torch.argmin(row))
        indices[n] = j
        available[j] = False

    if exhausted:
        get_training_logger().debug(
            f"有效内部点 {n_valid} 个少于边界点 {n_boundary} 个，匹配按轮次重复使用内部点"
        )
    return Matching(indices, exhausted=exhausted, valid=True)


def mix_seed(seed: int, step: int, epoch: int = 0) -> int:
    """由 (seed, 时间步, epoch) 派生确定性子种子"""
    return ((int(seed) * 1_000_003 + int(step)) * 1_000_033 + int(epoch)) % (2 ** 63 - 1)


class CloudSampler:
    """
    训练点云的提供者
    fresh = True 时每个 epoch 重新采样，否则每个时间步只采样一次（冻结点云）。
    种子只依赖 (seed, step, epoch)，断点续训得到同样的点云。
    """

    def __init__(self, domain: BoxDomain, n_interior: int, per_face: int, fresh: bool = True, seed: int = 0):
        if n_interior < 1 or per_face < 1:
            raise SamplingError(f"点数必须为正: 内部 {n_interior}，每面 {per_face}")
        self.domain = domain
        self.n_interior = int(n_interior)
        self.per_face = int(per_face)
        self.fresh = bool(fresh)
        self.seed = int(seed)
        self._cache = {}

    def clouds(self, step: int, epoch: int) -> PointClouds:
        key = (step, epoch if self.fresh else 0)
        if key not in self._cache:
            # 冻结点云按步缓存；新鲜点云只保留当前一组
            if self.fresh:
                self._cache.clear()
            self._cache[key] = sample_clouds(
                self.domain, self.n_interior, self.per_face, seed=mix_seed(self.seed, *key)
            )
        return self._cache[key]
