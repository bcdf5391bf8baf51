# -*- coding: utf-8 -*-

"""
静态图：误差-时间曲线与损失-epoch 曲线（Agg 后端，只写图片文件）
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_error_vs_time(per_time: pd.DataFrame, path: str, title: str = "") -> None:
    """
    按时间节点画相对 L2 误差与平均误差

    Args:
        per_time (pd.DataFrame): ErrorReport.per_time
        path (str): 输出图片路径
        title (str): 标题
    """
    fig, ax = plt.subplots(figsize=(7, 4))
    for (method, d), group in per_time.groupby(["method", "d"], sort=True):
        group = group.sort_values("t")
        ax.semilogy(group["t"], group["L2 relative error"], marker=".", label=f"{method} d={d} L2 rel")
        ax.semilogy(group["t"], group["mean error"], linestyle="--", label=f"{method} d={d} mean")
    ax.set_xlabel("t")
    ax.set_ylabel("error")
    ax.set_title(title or "error vs time")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_loss_vs_epoch(log: pd.DataFrame, path: str, title: str = "") -> None:
    """
    把每个时间步的训练损失首尾相接画成一条曲线

    Args:
        log (pd.DataFrame): 训练记录（列 step, epoch, loss）
        path (str): 输出图片路径
        title (str): 标题
    """
    fig, ax = plt.subplots(figsize=(7, 4))
    if not log.empty:
        ordered = log.sort_values(["step", "epoch"]).reset_index(drop=True)
        ax.plot(ordered.index + 1, ordered["loss"], linewidth=0.8)
        # 时间步分界
        for boundary in ordered.index[ordered["step"].diff().fillna(0) != 0]:
            ax.axvline(boundary + 1, color="grey", linewidth=0.3, alpha=0.5)
    ax.set_xlabel("cumulative epoch")
    ax.set_ylabel("loss")
    ax.set_title(title or "loss vs epoch")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
