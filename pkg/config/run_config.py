# -*- coding: utf-8 -*-

"""
运行配置
把 YAML 配置树校验并转换为不可变的 RunConfig；校验错误的消息中带有出错的点号路径。
"""

from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

from NN.autodiff import ACTIVATIONS
from NN.network import Architecture
from PDE.domain import CloudSampler
from PDE.nitsche import PENALTY_MODES, PenaltyConfig
from PDE.problems import PROBLEM_FACTORIES, Problem, make_problem
from config.presets import DEFAULTS, deep_merge
from solvers.dgm import DgmConfig
from solvers.gradient_flow import GradientFlowConfig
from solvers.jko import ENTROPY_NORMALIZATIONS, JkoConfig
from solvers.training import OPTIMIZERS, LrSchedule, TrainingConfig, TrainingError
from solvers.trajectory import TimeGrid
from utils.logger import get_training_logger

METHODS = ("nitsche", "jko", "dgm")


class ConfigError(Exception):
    """配置错误，key 为出错的点号路径"""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


def _lookup(tree: Dict[str, Any], path: str) -> Any:
    node = tree
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError("缺少配置项", path)
        node = node[key]
    return node


def _number(tree, path, kind=float, minimum=None, strict=True, optional=False):
    value = _lookup(tree, path)
    if value is None and optional:
        return None
    if isinstance(value, bool):
        raise ConfigError(f"应为数值，实际为 {value!r}", path)
    try:
        number = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"应为数值，实际为 {value!r}", path)
    if kind is int and float(value) != number:
        raise ConfigError(f"应为整数，实际为 {value!r}", path)
    if minimum is not None and (number <= minimum if strict else number < minimum):
        relation = ">" if strict else ">="
        raise ConfigError(f"必须 {relation} {minimum}，实际为 {number}", path)
    return number


def _choice(tree, path, options):
    value = _lookup(tree, path)
    if value not in options:
        raise ConfigError(f"取值 {value!r} 无效，可选: {', '.join(options)}", path)
    return value


def _flag(tree, path):
    value = _lookup(tree, path)
    if not isinstance(value, bool):
        raise ConfigError(f"应为 true/false，实际为 {value!r}", path)
    return value


def _schedule(tree, path) -> LrSchedule:
    value = _lookup(tree, path)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [[1, value]]
    if not isinstance(value, list) or not value:
        raise ConfigError("学习率表应为 [[起始epoch, 学习率], ...]", path)
    try:
        return LrSchedule.from_pairs(value)
    except (TrainingError, TypeError, ValueError, KeyError) as e:
        raise ConfigError(str(e), path)


def _dims(tree) -> Tuple[int, ...]:
    value = _lookup(tree, "problem.dims")
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigError("应为正整数列表", "problem.dims")
    dims = []
    for i, d in enumerate(value):
        if isinstance(d, bool) or not isinstance(d, int) or d < 1:
            raise ConfigError(f"维数必须为正整数，实际为 {d!r}", f"problem.dims[{i}]")
        dims.append(d)
    return tuple(dims)


@dataclass(frozen=True)
class TrainingSection:
    initial_epochs: int
    initial_schedule: LrSchedule
    step_epochs: int
    step_schedule: LrSchedule
    tol: float
    optimizer: str
    momentum: float
    l2_weight: float
    log_every: int

    def initial(self) -> TrainingConfig:
        return self.build(self.initial_epochs, self.initial_schedule)

    def step(self) -> TrainingConfig:
        return self.build(self.step_epochs, self.step_schedule)

    def build(self, epochs: int, schedule: LrSchedule) -> TrainingConfig:
        return TrainingConfig(
            epochs=epochs,
            schedule=schedule,
            tol=self.tol,
            optimizer=self.optimizer,
            momentum=self.momentum,
            log_every=self.log_every,
        )


@dataclass(frozen=True)
class RunConfig:
    """一次运行的全部超参数"""

    name: str
    method: str
    seed: int
    flavor: str
    dims: Tuple[int, ...]
    horizon: float
    tau: float
    blocks: int
    width: int
    activation: str
    interior_per_dim: int
    per_face: int
    fresh: bool
    penalty: PenaltyConfig
    training: TrainingSection
    jko: Dict[str, Any]
    dgm: Dict[str, Any]
    n_test: int
    eval_seed: int
    tree: Dict[str, Any]

    def problem(self, dim: int) -> Problem:
        return replace(make_problem(self.flavor, dim), horizon=self.horizon)

    def grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.horizon, self.tau)

    def architecture(self, dim: int) -> Architecture:
        input_dim = dim + 1 if self.method == "dgm" else dim
        return Architecture(input_dim, 1, self.blocks, self.width, self.activation)

    def sampler(self, dim: int) -> CloudSampler:
        problem = self.problem(dim)
        return CloudSampler(problem.domain, self.interior_per_dim * dim, self.per_face, self.fresh, self.seed)

    def gradient_flow_config(self, dim: int) -> GradientFlowConfig:
        return GradientFlowConfig(
            initial=self.training.initial(),
            step=self.training.step(),
            sampler=self.sampler(dim),
            penalty=self.penalty,
            l2_weight=self.training.l2_weight,
            seed=self.seed,
        )

    def jko_config(self, dim: int) -> JkoConfig:
        return JkoConfig(
            initial=self.training.initial(),
            step=self.training.step(),
            sampler=self.sampler(dim),
            epsilon=self.jko["epsilon"],
            sinkhorn_tol=self.jko["sinkhorn_tol"],
            sinkhorn_iters=self.jko["sinkhorn_iters"],
            divergence=self.jko["divergence"],
            entropy_normalization=self.jko["entropy_normalization"],
            mass_weight=self.jko["mass_weight"],
            seed=self.seed,
        )

    def dgm_config(self, dim: int) -> DgmConfig:
        training = self.training.build(self.dgm["epochs"], self.dgm["schedule"])
        return DgmConfig(
            training=training,
            n_interior=self.dgm["interior_per_dim"] * (dim + 1),
            per_face=self.dgm["per_face"],
            n_initial=self.dgm["initial_points"],
            fresh=self.fresh,
            seed=self.seed,
            checkpoint_every=self.dgm["checkpoint_every"],
        )


def parse_run_config(tree: Dict[str, Any]) -> RunConfig:
    """
    校验配置树并构造 RunConfig

    Args:
        tree (Dict[str, Any]): YAML 配置树（缺省项由 DEFAULTS 补齐）

    Returns:
        RunConfig: 运行配置

    Raises:
        ConfigError: 消息中包含出错的配置项路径
    """
    if not isinstance(tree, dict):
        raise ConfigError("配置文件顶层必须是映射")
    for section, value in tree.items():
        if section not in DEFAULTS:
            raise ConfigError("未知配置段", section)
        if value is not None and not isinstance(value, dict):
            raise ConfigError("配置段必须是映射", section)
        for key in value or {}:
            if key not in DEFAULTS[section]:
                raise ConfigError("未知配置项", f"{section}.{key}")

    full = deep_merge(DEFAULTS, {k: v for k, v in tree.items() if v is not None})
    method = _choice(full, "run.method", METHODS)
    flavor = _choice(full, "problem.flavor", tuple(PROBLEM_FACTORIES))
    if method == "jko" and flavor != "neumann-heat":
        raise ConfigError("jko 方法只适用于 neumann-heat 问题", "problem.flavor")
    if method != "nitsche" and full["penalty"] != DEFAULTS["penalty"]:
        get_training_logger().warning(f"{method} 方法不使用罚参数，penalty 配置被忽略")

    horizon = _number(full, "problem.T", minimum=0.0)
    tau = _number(full, "problem.tau", minimum=0.0)
    count = round(horizon / tau)
    if count < 1 or abs(count * tau - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigError(f"T = {horizon} 不能被 τ = {tau} 整除", "problem.tau")

    factor = _number(full, "penalty.factor", minimum=0.0, optional=True)
    penalty = PenaltyConfig(
        mode=_choice(full, "penalty.mode", PENALTY_MODES),
        factor=factor,
        gamma_min=_number(full, "penalty.gamma_min", minimum=0.0),
        grad_floor=_number(full, "penalty.grad_floor", minimum=0.0, strict=False),
    )

    training = TrainingSection(
        initial_epochs=_number(full, "training.initial_epochs", int, minimum=1, strict=False),
        initial_schedule=_schedule(full, "training.initial_schedule"),
        step_epochs=_number(full, "training.step_epochs", int, minimum=1, strict=False),
        step_schedule=_schedule(full, "training.step_schedule"),
        tol=_number(full, "training.tol", minimum=0.0, strict=False),
        optimizer=_choice(full, "training.optimizer", OPTIMIZERS),
        momentum=_number(full, "training.momentum", minimum=0.0, strict=False),
        l2_weight=_number(full, "training.l2_weight", minimum=0.0),
        log_every=_number(full, "training.log_every", int, minimum=0, strict=False),
    )

    jko = {
        "epsilon": _number(full, "jko.epsilon", minimum=0.0, optional=True),
        "sinkhorn_tol": _number(full, "jko.sinkhorn_tol", minimum=0.0),
        "sinkhorn_iters": _number(full, "jko.sinkhorn_iters", int, minimum=1, strict=False),
        "divergence": _flag(full, "jko.divergence"),
        "entropy_normalization": _choice(full, "jko.entropy_normalization", ENTROPY_NORMALIZATIONS),
        "mass_weight": _number(full, "jko.mass_weight", minimum=0.0, strict=False),
    }
    dgm = {
        "epochs": _number(full, "dgm.epochs", int, minimum=1, strict=False),
        "schedule": _schedule(full, "dgm.schedule"),
        "interior_per_dim": _number(full, "dgm.interior_per_dim", int, minimum=1, strict=False),
        "per_face": _number(full, "dgm.per_face", int, minimum=1, strict=False),
        "initial_points": _number(full, "dgm.initial_points", int, minimum=1, strict=False),
        "checkpoint_every": _number(full, "dgm.checkpoint_every", int, minimum=0, strict=False),
    }

    name = str(full["run"].get("name") or f"{method}-{flavor}")
    full["run"]["name"] = name
    return RunConfig(
        name=name,
        method=method,
        seed=_number(full, "run.seed", int, minimum=0, strict=False),
        flavor=flavor,
        dims=_dims(full),
        horizon=horizon,
        tau=tau,
        blocks=_number(full, "network.blocks", int, minimum=0, strict=False),
        width=_number(full, "network.width", int, minimum=1, strict=False),
        activation=_choice(full, "network.activation", tuple(ACTIVATIONS)),
        interior_per_dim=_number(full, "sampling.interior_per_dim", int, minimum=1, strict=False),
        per_face=_number(full, "sampling.per_face", int, minimum=1, strict=False),
        fresh=_flag(full, "sampling.fresh"),
        penalty=penalty,
        training=training,
        jko=jko,
        dgm=dgm,
        n_test=_number(full, "evaluation.n_test", int, minimum=1, strict=False),
        eval_seed=_number(full, "evaluation.seed", int, minimum=0, strict=False),
        tree=full,
    )
