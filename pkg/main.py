# -*- coding: utf-8 -*-

"""
DGF_PDE 命令行入口

    python main.py preset list
    python main.py preset show table1-desk
    python main.py fit-ic --preset table1-desk
    python main.py solve --config config.yaml --seed 3 --out runs
    python main.py solve --preset table3-desk --resume
    python main.py eval runs/table1-desk
    python main.py report runs/table1-desk runs/table2-desk --output runs/compare.csv --markdown runs/compare.md

退出码：0 成功，1 运行失败，2 配置错误
"""

import argparse
import os
import sys
from typing import List, Optional

import yaml

from config.config_manager import DEFAULT_CONFIG_FILE, load_config_manager
from config.presets import DEFAULTS, PRESETS, deep_merge, get_preset, preset_names
from config.run_config import ConfigError, parse_run_config
from utils.logger import get_app_logger, get_error_logger, initialize_logging, log_exception

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgf", description="深度离散梯度流 PDE 求解器")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_run_options(sub):
        sub.add_argument("--config", help=f"YAML 配置文件（缺省读取 {DEFAULT_CONFIG_FILE}，不存在时使用内置默认值）")
        sub.add_argument("--preset", help="内置预设名，与 --config 同时给出时配置文件覆盖预设")
        sub.add_argument("--seed", type=int, help="覆盖 run.seed")
        sub.add_argument("--out", help="输出根目录（缺省为环境变量 DGF_OUTPUT_ROOT 或 runs/）")

    fit = commands.add_parser("fit-ic", help="只拟合初值 u_0")
    add_run_options(fit)

    solve = commands.add_parser("solve", help="完整求解并评估")
    add_run_options(solve)
    solve.add_argument("--resume", action="store_true", help="从已有检查点继续")

    evaluate = commands.add_parser("eval", help="重新评估运行目录中的检查点")
    evaluate.add_argument("run_dir", help="运行目录")
    evaluate.add_argument("--n-test", type=int, help="每个时间节点的测试点数")
    evaluate.add_argument("--seed", type=int, help="测试点种子")

    report = commands.add_parser("report", help="合并多个运行目录的误差报告")
    report.add_argument("run_dirs", nargs="+", help="运行目录")
    report.add_argument("--output", default="report.csv", help="合并后的 CSV")
    report.add_argument("--markdown", help="可选的 Markdown 表格")

    preset = commands.add_parser("preset", help="查看内置预设")
    preset_commands = preset.add_subparsers(dest="preset_command", required=True)
    preset_commands.add_parser("list", help="列出预设")
    show = preset_commands.add_parser("show", help="以 YAML 输出预设")
    show.add_argument("name")
    return parser


def load_tree(args) -> dict:
    """
    组装配置树：DEFAULTS <- 预设 <- 配置文件 <- 命令行覆盖
    配置文件同时交给全局 ConfigManager，日志系统从中读取 logging.*
    """
    tree = get_preset(args.preset) if args.preset else dict(DEFAULTS)
    config_file = args.config
    if config_file is None and os.path.exists(DEFAULT_CONFIG_FILE) and not args.preset:
        config_file = DEFAULT_CONFIG_FILE

    if config_file:
        if not os.path.exists(config_file):
            raise ConfigError(f"配置文件 {config_file} 不存在", "--config")
        try:
            manager = load_config_manager(config_file)
        except yaml.YAMLError as e:
            raise ConfigError(f"无法解析 {config_file}: {e}", "--config")
        tree = deep_merge(tree, manager.as_dict())
    manager = load_config_manager(config_file or "<preset>", data=tree)

    if args.seed is not None:
        manager.set("run.seed", args.seed)
    return manager.as_dict()


def _run_command(args) -> int:
    from runner.run import fit_initial_condition, output_root, run

    tree = load_tree(args)
    initialize_logging()
    config = parse_run_config(tree)
    root = output_root(args.out)
    logger = get_app_logger()
    if args.command == "fit-ic":
        run_dir = fit_initial_condition(config, root)
        logger.info(f"初值拟合写入 {run_dir}")
        return EXIT_OK

    report = run(config, root, resume=args.resume, preset=args.preset)
    print(report.table().to_string(index=False))
    return EXIT_OK


def _eval_command(args) -> int:
    from runner.run import evaluate_run

    initialize_logging()
    report = evaluate_run(args.run_dir, n_test=args.n_test, seed=args.seed)
    print(report.table().to_string(index=False))
    return EXIT_OK


def _report_command(args) -> int:
    from runner.report import write_report

    initialize_logging()
    merged = write_report(args.run_dirs, args.output, args.markdown)
    print(merged.to_string(index=False))
    return EXIT_OK


def _preset_command(args) -> int:
    if args.preset_command == "list":
        for name in preset_names():
            method = PRESETS[name]["run"]["method"]
            dims = PRESETS[name]["problem"]["dims"]
            print(f"{name:<14} method={method:<8} dims={dims}")
        return EXIT_OK
    print(yaml.safe_dump(get_preset(args.name), allow_unicode=True, sort_keys=False), end="")
    return EXIT_OK


COMMANDS = {
    "fit-ic": _run_command,
    "solve": _run_command,
    "eval": _eval_command,
    "report": _report_command,
    "preset": _preset_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        get_error_logger().error(f"配置错误: {e}")
        print(f"配置错误: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        get_app_logger().info("用户中断，可用 --resume 从最后的检查点继续")
        return EXIT_FAILURE
    except Exception as e:
        log_exception(get_error_logger(), f"{args.command} 执行失败")
        print(f"{args.command} 失败: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
