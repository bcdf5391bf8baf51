# -*- coding: utf-8 -*-

"""
合并多个运行目录的误差报告，并附上全规模的参考值
"""

import os
from typing import Iterable, List, Optional

import pandas as pd

from PDE.metrics import REPORT_COLUMNS, TABLE_COLUMNS
from utils.logger import get_app_logger

REPORT_FILE = "report.csv"
PER_TIME_FILE = "per_time.csv"
TABLE_FILE = "table.csv"

# 全规模的结果: (L2 相对误差, 最大误差, 平均误差)
REFERENCE_TABLES = {
    "nitsche": {
        2: (1.6e-2, 9.3e-3, 2.9e-3),
        3: (4.7e-3, 7.2e-3, 1.3e-3),
        5: (2.0e-3, 1.5e-3, 2.9e-4),
        10: (3.5e-3, 1.9e-3, 2.4e-4),
        20: (4.2e-3, 3.4e-3, 3.7e-4),
    },
    "dgm": {
        2: (9.9e-2, 8.7e-2, 3.4e-2),
        3: (9.3e-2, 1.0e-1, 3.2e-2),
        5: (1.2e-1, 1.2e-1, 2.8e-2),
        10: (4.5e-1, 2.9e-1, 1.5e-1),
        20: (4.7e-1, 4.2e-1, 1.3e-1),
    },
    "jko": {
        2: (8.7e-2, 1.0e-1, 8.5e-2),
        3: (1.7e-1, 4.8e-1, 1.3e-1),
        5: (8.6e-2, 4.2e-1, 5.3e-2),
        10: (8.2e-3, 3.9e-2, 6.8e-3),
        20: (4.0e-3, 6.8e-3, 4.0e-3),
        40: (2.1e-3, 4.2e-3, 1.9e-3),
        50: (2.5e-3, 1.6e-2, 2.5e-3),
    },
}
REFERENCE_COLUMNS = ["reference L2 relative error", "reference max error", "reference mean error"]


class ReportError(Exception):
    """报告合并异常"""

    pass


def reference_row(method: str, dim: int) -> Optional[tuple]:
    return REFERENCE_TABLES.get(method, {}).get(int(dim))


def with_reference(frame: pd.DataFrame) -> pd.DataFrame:
    """为每行附加全规模的参考值（无参考值时为 NaN）"""
    frame = frame.copy()
    values = [reference_row(m, d) or (float("nan"),) * 3 for m, d in zip(frame["method"], frame["d"])]
    for i, column in enumerate(REFERENCE_COLUMNS):
        frame[column] = [v[i] for v in values]
    return frame


def merge_reports(run_dirs: Iterable[str]) -> pd.DataFrame:
    """
    读取并合并各运行目录下的 report.csv

    Args:
        run_dirs (Iterable[str]): 运行目录

    Returns:
        pd.DataFrame: 按 d、method 排序的合并表，含参考列
    """
    run_dirs = list(run_dirs)
    if not run_dirs:
        raise ReportError(f"没有给出运行目录；每个目录应包含 {REPORT_FILE}")
    missing: List[str] = [d for d in run_dirs if not os.path.isfile(os.path.join(d, REPORT_FILE))]
    if missing:
        listing = "\n".join(f"  {os.path.join(d, REPORT_FILE)}" for d in missing)
        raise ReportError(f"以下运行目录缺少误差报告:\n{listing}")

    frames = []
    for directory in run_dirs:
        frame = pd.read_csv(os.path.join(directory, REPORT_FILE))
        absent = [c for c in ("method", *TABLE_COLUMNS) if c not in frame.columns]
        if absent:
            raise ReportError(f"{os.path.join(directory, REPORT_FILE)} 缺少列 {absent}")
        frame.insert(0, "run", os.path.basename(os.path.normpath(directory)))
        frames.append(frame)

    merged = pd.concat(frames, ignore_index=True)
    merged = merged.sort_values(["d", "method"], kind="stable").reset_index(drop=True)
    columns = ["run", *[c for c in REPORT_COLUMNS if c in merged.columns]]
    return with_reference(merged[columns])


def ordering_notes(frame: pd.DataFrame) -> List[str]:
    """
    同一维数下方法间 L2 相对误差的排序与全规模参考不一致时给出说明

    Returns:
        List[str]: 每个不一致的维数一条
    """
    notes = []
    column = REFERENCE_COLUMNS[0]
    for dim, group in frame.dropna(subset=[column]).groupby("d", sort=True):
        best = group.groupby("method")[["L2 relative error", column]].min()
        if len(best) < 2:
            continue
        observed = list(best["L2 relative error"].sort_values(kind="stable").index)
        reference = list(best[column].sort_values(kind="stable").index)
        if observed != reference:
            notes.append(
                f"d = {dim}: 实测误差排序 {' < '.join(observed)}，全规模参考为 {' < '.join(reference)}"
            )
    return notes


def to_markdown(frame: pd.DataFrame) -> str:
    """简单的 Markdown 表格（浮点数用科学计数法）"""

    def cell(value):
        if isinstance(value, float):
            return "-" if pd.isna(value) else f"{value:.1e}"
        return str(value)

    header = "| " + " | ".join(frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    rows = ["| " + " | ".join(cell(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *rows]) + "\n"


def write_report(run_dirs: Iterable[str], output: str, markdown: Optional[str] = None) -> pd.DataFrame:
    """
    合并报告并写出 CSV（可选 Markdown）

    Args:
        run_dirs (Iterable[str]): 运行目录
        output (str): 合并后的 CSV 路径
        markdown (Optional[str]): Markdown 表格路径

    Returns:
        pd.DataFrame: 合并表
    """
    merged = merge_reports(run_dirs)
    directory = os.path.dirname(output)
    if directory:
        os.makedirs(directory, exist_ok=True)
    merged.to_csv(output, index=False)
    notes = ordering_notes(merged)
    if markdown:
        columns = ["method", *TABLE_COLUMNS, REFERENCE_COLUMNS[0]]
        with open(markdown, "w", encoding="utf-8") as file:
            file.write(to_markdown(merged[columns]))
            if notes:
                file.write("\n" + "\n".join(f"- {note}" for note in notes) + "\n")
    for note in notes:
        get_app_logger().warning(note)
    get_app_logger().info(f"合并了 {len(merged)} 行误差报告 -> {output}")
    return merged
