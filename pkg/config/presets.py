# -*- coding: utf-8 -*-

"""
内置实验预设
full 版本为全规模超参数（CI 不运行），desk 版本是几十分钟内可跑完的缩小规模。
预设只写与 DEFAULTS 不同的配置项，使用前与 DEFAULTS 深度合并。
"""

import copy
from typing import Any, Dict

# 完整的默认配置树（与 config.yaml 同结构）
DEFAULTS: Dict[str, Any] = {
    "run": {"method": "nitsche", "seed": 0, "name": None},
    "problem": {"flavor": "dirichlet-heat", "dims": [2], "T": 1.0, "tau": 0.01},
    "network": {"blocks": 3, "width": 50, "activation": "tanh"},
    "sampling": {"interior_per_dim": 600, "per_face": 600, "fresh": True},
    "penalty": {"mode": "max", "factor": None, "gamma_min": 1.0, "grad_floor": 0.0},
    "training": {
        "initial_epochs": 50000,
        "initial_schedule": [[1, 1.0e-2], [10000, 1.0e-3], [40000, 1.0e-4]],
        "step_epochs": 2000,
        "step_schedule": [[1, 1.0e-3], [501, 1.0e-4]],
        "tol": 1.0e-8,
        "optimizer": "sgd",
        "momentum": 0.9,
        "l2_weight": 1.0,
        "log_every": 100,
    },
    "jko": {
        "epsilon": None,
        "sinkhorn_tol": 1.0e-9,
        "sinkhorn_iters": 10000,
        "divergence": False,
        "entropy_normalization": "raw",
        "mass_weight": 10.0,
    },
    "dgm": {
        "epochs": 200000,
        "schedule": [[1, 1.0e-2], [10000, 1.0e-3], [40000, 1.0e-4]],
        "interior_per_dim": 600,
        "per_face": 600,
        "initial_points": 600,
        "checkpoint_every": 1000,
    },
    "evaluation": {"n_test": 4096, "seed": 1234},
    "logging": {"log_directory": "logs", "console_level": "INFO"},
}

_DESK_NETWORK = {"blocks": 2, "width": 20, "activation": "tanh"}

PRESETS: Dict[str, Dict[str, Any]] = {
    "table1-full": {
        "run": {"method": "nitsche"},
        "problem": {"flavor": "dirichlet-heat", "dims": [2, 3, 5, 10, 20], "tau": 0.01},
        # 全规模设置使用 ReLU；拉普拉斯不参与 Nitsche 泛函，一阶导数足够
        "network": {"activation": "relu"},
    },
    "table1-desk": {
        "run": {"method": "nitsche"},
        "problem": {"flavor": "dirichlet-heat", "dims": [2, 3], "tau": 0.05},
        "network": _DESK_NETWORK,
        "sampling": {"interior_per_dim": 300, "per_face": 150},
        # 小点云下 max 规则的 γ 随近零的 |∇w(y_n)| 在相邻步间跳动数个量级
        "penalty": {"mode": "pointwise", "grad_floor": 0.25},
        "training": {
            "initial_epochs": 2000,
            "initial_schedule": [[1, 1.0e-3], [1501, 3.0e-4]],
            "step_epochs": 400,
            "step_schedule": [[1, 1.0e-3], [301, 1.0e-4]],
            "optimizer": "adam",
        },
        "evaluation": {"n_test": 2048},
    },
    "table2-full": {
        "run": {"method": "dgm"},
        "problem": {"flavor": "dirichlet-heat", "dims": [2, 3, 5, 10, 20]},
        "network": {"activation": "relu"},
    },
    "table2-desk": {
        "run": {"method": "dgm"},
        "problem": {"flavor": "dirichlet-heat", "dims": [2, 3], "tau": 0.05},
        "network": _DESK_NETWORK,
        "dgm": {
            "epochs": 10000,
            "schedule": [[1, 1.0e-3], [7001, 3.0e-4]],
            "interior_per_dim": 200,
            "per_face": 100,
            "initial_points": 200,
        },
        "training": {"optimizer": "adam"},
        "evaluation": {"n_test": 2048},
    },
    "table3-full": {
        "run": {"method": "jko"},
        "problem": {"flavor": "neumann-heat", "dims": [2, 3, 5, 10, 20, 40, 50], "tau": 0.01},
        "network": {"activation": "relu"},
        "sampling": {"interior_per_dim": 100, "per_face": 1},
        "training": {
            "initial_epochs": 4000,
            "initial_schedule": [[1, 1.0e-3], [2000, 1.0e-4]],
            "step_epochs": 100,
            "step_schedule": [[1, 1.0e-5]],
        },
    },
    "table3-desk": {
        "run": {"method": "jko"},
        "problem": {"flavor": "neumann-heat", "dims": [2, 10], "tau": 0.05},
        "network": _DESK_NETWORK,
        "sampling": {"interior_per_dim": 100, "per_face": 1, "fresh": False},
        "training": {
            "initial_epochs": 2000,
            "initial_schedule": [[1, 1.0e-3], [1501, 1.0e-4]],
            "step_epochs": 100,
            "step_schedule": [[1, 1.0e-3], [51, 1.0e-4]],
            "optimizer": "adam",
        },
        "evaluation": {"n_test": 2048},
    },
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并两个配置树，override 优先；返回新字典"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def preset_names() -> list:
    return sorted(PRESETS)


def get_preset(name: str) -> Dict[str, Any]:
    """
    取出合并了默认值的完整预设配置树

    Args:
        name (str): 预设名

    Returns:
        Dict[str, Any]: 配置树
    """
    from config.run_config import ConfigError

    if name not in PRESETS:
        raise ConfigError(f"未知预设 {name}，可选: {', '.join(preset_names())}", "preset")
    tree = deep_merge(DEFAULTS, PRESETS[name])
    tree["run"]["name"] = tree["run"].get("name") or name
    return tree
