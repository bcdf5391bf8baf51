# -*- coding: utf-8 -*-

"""
实验编排
运行目录布局：
    <root>/<name>/run_config.yaml    解析后的完整配置
    <root>/<name>/run_meta.yaml      时间戳、耗时、方法、维数、状态
    <root>/<name>/report.csv         所有维数的误差汇总（含 method 等附加列）
    <root>/<name>/table.csv          只含 d / L2 relative error / max error / mean error 四列
    <root>/<name>/per_time.csv       逐时间节点误差
    <root>/<name>/d<d>/              检查点、steps.csv、training_log.csv、图片
"""

import os
import time
from typing import Optional

import yaml

from NN.checkpoint import load_checkpoint
from PDE.metrics import ErrorReport, evaluate, space_time_predictor, trajectory_predictor
from config.run_config import RunConfig, parse_run_config
from runner.plots import plot_error_vs_time, plot_loss_vs_epoch
from runner.report import PER_TIME_FILE, REPORT_FILE, TABLE_FILE
from solvers.dgm import CHECKPOINT_NAME, solve_dgm
from solvers.gradient_flow import fit_initial, record_step, solve
from solvers.jko import solve_jko
from solvers.trajectory import Trajectory
from utils.clock import format_timestamp, get_local_time
from utils.logger import get_app_logger

OUTPUT_ENV = "DGF_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"


class RunError(Exception):
    """运行失败"""

    pass


def output_root(override: Optional[str] = None) -> str:
    """--out 优先，其次环境变量 DGF_OUTPUT_ROOT，最后 runs/"""
    return override or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_ROOT


def run_directory(config: RunConfig, root: str) -> str:
    return os.path.join(root, config.name)


def dim_directory(run_dir: str, dim: int) -> str:
    return os.path.join(run_dir, f"d{dim}")


def _write_yaml(path: str, data: dict) -> None:
    with open(path, "w", encoding="utf-8") as file:
        yaml.safe_dump(data, file, allow_unicode=True, sort_keys=False)


def load_run(run_dir: str) -> RunConfig:
    """从运行目录的 run_config.yaml 还原配置"""
    path = os.path.join(run_dir, "run_config.yaml")
    if not os.path.isfile(path):
        raise RunError(f"{run_dir} 不是运行目录：缺少 run_config.yaml")
    with open(path, "r", encoding="utf-8") as file:
        return parse_run_config(yaml.safe_load(file) or {})


def fit_initial_condition(config: RunConfig, root: str) -> str:
    """
    只做初值拟合，结果作为 u_0000.ckpt 写入各维数目录，之后 solve --resume 可直接接着算

    Returns:
        str: 运行目录
    """
    if config.method == "dgm":
        raise RunError("DGM 没有单独的初值拟合步骤")
    run_dir = run_directory(config, root)
    os.makedirs(run_dir, exist_ok=True)
    _write_yaml(os.path.join(run_dir, "run_config.yaml"), config.tree)
    grid = config.grid()
    for dim in config.dims:
        started = time.time()
        problem = config.problem(dim)
        flow = config.gradient_flow_config(dim)
        net, result = fit_initial(problem, config.architecture(dim), flow.initial, flow.sampler, config.seed)
        trajectory = Trajectory(grid)
        record_step(trajectory, net, 0, 0.0, result, 0.0, time.time() - started, dim_directory(run_dir, dim))
        get_app_logger().info(f"d={dim} 初值拟合完成: loss = {result.final_loss:.6e}")
    return run_dir


def _solve_dimension(config: RunConfig, dim: int, run_dir: str, resume: bool):
    """求解一个维数，返回 (predictor, 训练记录, 耗时)"""
    directory = dim_directory(run_dir, dim)
    os.makedirs(directory, exist_ok=True)
    problem = config.problem(dim)
    architecture = config.architecture(dim)
    started = time.time()

    if config.method == "dgm":
        result = solve_dgm(problem, architecture, config.dgm_config(dim), directory, resume=resume)
        return space_time_predictor(result.network), result.log, time.time() - started

    grid = config.grid()
    partial = Trajectory.load(directory, grid) if resume else None
    if config.method == "nitsche":
        trajectory = solve(problem, architecture, grid, config.gradient_flow_config(dim), directory, partial)
    else:
        trajectory = solve_jko(problem, architecture, grid, config.jko_config(dim), directory, partial)
    return trajectory_predictor(trajectory.networks), trajectory.log, time.time() - started


def run(config: RunConfig, root: str, resume: bool = False, preset: Optional[str] = None) -> ErrorReport:
    """
    执行配置中的所有维数并写出全部产物

    Args:
        config (RunConfig): 运行配置
        root (str): 输出根目录
        resume (bool): 从已有检查点继续
        preset (Optional[str]): 预设名（写入元数据）

    Returns:
        ErrorReport: 所有维数的误差报告
    """
    logger = get_app_logger()
    run_dir = run_directory(config, root)
    os.makedirs(run_dir, exist_ok=True)
    _write_yaml(os.path.join(run_dir, "run_config.yaml"), config.tree)

    started_at = get_local_time()
    meta = {
        "name": config.name,
        "method": config.method,
        "flavor": config.flavor,
        "dims": list(config.dims),
        "seed": config.seed,
        "preset": preset,
        "resumed": bool(resume),
        "started": format_timestamp(started_at),
        "status": "running",
    }
    _write_yaml(os.path.join(run_dir, "run_meta.yaml"), meta)
    logger.info(f"开始运行 {config.name}: 方法 {config.method}, 维数 {list(config.dims)}, 输出 {run_dir}")

    reports, runtimes = [], {}
    try:
        for dim in config.dims:
            predict, log, runtime = _solve_dimension(config, dim, run_dir, resume)
            runtimes[dim] = runtime
            report = _evaluate(config, dim, predict, runtime)
            _write_dimension_outputs(run_dir, dim, report, log)
            reports.append(report)
    except Exception:
        meta.update(status="failed", finished=format_timestamp(get_local_time()))
        _write_yaml(os.path.join(run_dir, "run_meta.yaml"), meta)
        raise

    combined = ErrorReport.concat(reports)
    _write_run_outputs(run_dir, combined, config.name)
    finished_at = get_local_time()
    meta.update(
        status="complete",
        finished=format_timestamp(finished_at),
        runtime_s=round((finished_at - started_at).total_seconds(), 3),
        runtime_per_dim={int(d): round(t, 3) for d, t in runtimes.items()},
    )
    _write_yaml(os.path.join(run_dir, "run_meta.yaml"), meta)
    logger.info(f"运行 {config.name} 完成，结果写入 {os.path.join(run_dir, REPORT_FILE)}")
    return combined


def _evaluate(config: RunConfig, dim: int, predict, runtime: float) -> ErrorReport:
    return evaluate(
        predict,
        config.problem(dim),
        config.grid().nodes[1:],
        n_test=config.n_test,
        seed=config.eval_seed,
        method=config.method,
        runtime=runtime,
    )


def _write_dimension_outputs(run_dir: str, dim: int, report: ErrorReport, log) -> None:
    directory = dim_directory(run_dir, dim)
    report.to_csv(os.path.join(directory, REPORT_FILE), os.path.join(directory, PER_TIME_FILE))
    if log is not None and not log.empty:
        log.to_csv(os.path.join(directory, "training_log.csv"), index=False)
        plot_loss_vs_epoch(log, os.path.join(directory, "loss_vs_epoch.png"), f"d={dim}")
    plot_error_vs_time(report.per_time, os.path.join(directory, "error_vs_time.png"), f"d={dim}")


def _write_run_outputs(run_dir: str, report: ErrorReport, title: str) -> None:
    report.to_csv(os.path.join(run_dir, REPORT_FILE), os.path.join(run_dir, PER_TIME_FILE))
    report.table().to_csv(os.path.join(run_dir, TABLE_FILE), index=False)
    if not report.per_time.empty:
        plot_error_vs_time(report.per_time, os.path.join(run_dir, "error_vs_time.png"), title)


def evaluate_run(run_dir: str, n_test: Optional[int] = None, seed: Optional[int] = None) -> ErrorReport:
    """
    重新评估已有运行目录中的检查点（不训练）

    Args:
        run_dir (str): 运行目录
        n_test (Optional[int]): 覆盖每个节点的测试点数
        seed (Optional[int]): 覆盖测试点种子

    Returns:
        ErrorReport: 误差报告（同时覆盖写入 report.csv）
    """
    config = load_run(run_dir)
    grid = config.grid()
    reports = []
    for dim in config.dims:
        directory = dim_directory(run_dir, dim)
        if config.method == "dgm":
            path = os.path.join(directory, CHECKPOINT_NAME)
            if not os.path.isfile(path):
                raise RunError(f"缺少 DGM 检查点 {path}")
            predict = space_time_predictor(load_checkpoint(path))
        else:
            trajectory = Trajectory.load(directory, grid)
            if not trajectory.complete:
                raise RunError(
                    f"{directory} 的轨迹不完整: {len(trajectory.networks)}/{grid.count + 1} 个检查点，请用 --resume 继续"
                )
            predict = trajectory_predictor(trajectory.networks)
        report = evaluate(
            predict,
            config.problem(dim),
            grid.nodes[1:],
            n_test=n_test or config.n_test,
            seed=config.eval_seed if seed is None else seed,
            method=config.method,
        )
        report.to_csv(os.path.join(directory, REPORT_FILE), os.path.join(directory, PER_TIME_FILE))
        reports.append(report)
    combined = ErrorReport.concat(reports)
    _write_run_outputs(run_dir, combined, config.name)
    return combined
