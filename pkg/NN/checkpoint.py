# -*- coding: utf-8 -*-

"""
网络检查点读写
文件格式：UTF-8 文本头（每行 key=value，以 END 行结束），随后是小端 float64 展平参数。

    DGFNET-CHECKPOINT
    version=1
    input_dim=2
    output_dim=1
    blocks=3
    width=50
    activation=tanh
    count=32301
    byteorder=little
    dtype=float64
    END
    <count * 8 字节>
"""

import os

import numpy as np
import torch

from NN.autodiff import DTYPE
from NN.network import Architecture, DGMNet, NetworkError
from utils.logger import get_app_logger

MAGIC = "DGFNET-CHECKPOINT"
FORMAT_VERSION = 1
HEADER_END = b"END\n"


class CheckpointError(Exception):
    """检查点读写异常"""

    pass


def save_checkpoint(net: DGMNet, path: str) -> None:
    """
    保存网络参数

    Args:
        net (DGMNet): 网络
        path (str): 输出文件路径
    """
    arch = net.architecture
    theta = net.flat().numpy().astype("<f8")
    header = [
        MAGIC,
        f"version={FORMAT_VERSION}",
        f"input_dim={arch.input_dim}",
        f"output_dim={arch.output_dim}",
        f"blocks={arch.blocks}",
        f"width={arch.width}",
        f"activation={arch.activation}",
        f"count={theta.size}",
        "byteorder=little",
        "dtype=float64",
    ]

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(path, "wb") as file:
        file.write(("\n".join(header) + "\n").encode("utf-8"))
        file.write(HEADER_END)
        file.write(theta.tobytes())

    get_app_logger().debug(f"检查点已保存: {path} ({theta.size} 个参数)")


def _parse_header(raw: bytes, path: str) -> dict:
    lines = raw.decode("utf-8").splitlines()
    if not lines or lines[0] != MAGIC:
        raise CheckpointError(f"{path} 不是网络检查点文件")
    fields = {}
    for line in lines[1:]:
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"{path} 文件头行格式错误: {line!r}")
        fields[key.strip()] = value.strip()
    return fields


def load_checkpoint(path: str) -> DGMNet:
    """
    读取网络参数

    Args:
        path (str): 检查点文件路径

    Returns:
        DGMNet: 参数逐位还原的网络
    """
    with open(path, "rb") as file:
        blob = file.read()

    end = blob.find(HEADER_END)
    if end < 0:
        raise CheckpointError(f"{path} 缺少文件头结束标记")
    fields = _parse_header(blob[:end], path)
    payload = blob[end + len(HEADER_END):]

    try:
        version = int(fields["version"])
    except (KeyError, ValueError):
        raise CheckpointError(f"{path} 缺少有效的 version 字段")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} 版本不匹配: 文件 {version}，支持 {FORMAT_VERSION}")
    if fields.get("byteorder", "little") != "little" or fields.get("dtype", "float64") != "float64":
        raise CheckpointError(f"{path} 仅支持小端 float64 数据")

    try:
        arch = Architecture(
            input_dim=int(fields["input_dim"]),
            output_dim=int(fields["output_dim"]),
            blocks=int(fields["blocks"]),
            width=int(fields["width"]),
            activation=fields["activation"],
        )
        count = int(fields["count"])
    except KeyError as e:
        raise CheckpointError(f"{path} 文件头缺少字段 {e}")
    except (ValueError, NetworkError) as e:
        raise CheckpointError(f"{path} 文件头字段无效: {e}")

    if count != arch.parameter_count:
        raise CheckpointError(
            f"{path} 参数个数与结构不符: 文件头 {count}，结构要求 {arch.parameter_count}"
        )
    expected_bytes = count * 8
    if len(payload) != expected_bytes:
        raise CheckpointError(f"{path} 数据长度错误: 期望 {expected_bytes} 字节，实际 {len(payload)} 字节")

    theta = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    net = DGMNet(arch)
    net.load_flat(torch.from_numpy(theta.copy()).to(DTYPE))
    return net
