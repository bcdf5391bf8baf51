"""
配置管理器模块
提供YAML配置文件的读取和管理功能
"""

import copy
import os
from typing import Any, Dict, Optional

import yaml

DEFAULT_CONFIG_FILE = "config.yaml"


class ConfigManager:
    """配置管理器类"""

    def __init__(self, config_file: str = DEFAULT_CONFIG_FILE, data: Optional[Dict[str, Any]] = None):
        """
        初始化配置管理器

        Args:
            config_file (str): 配置文件路径
            data (Optional[Dict[str, Any]]): 直接给定的配置树（预设），给定时不读取文件
        """
        self.config_file = config_file
        self.config_data: Dict[str, Any] = {}

        # 延迟导入日志函数以避免循环依赖
        from utils.logger import get_app_logger, get_error_logger

        self.app_logger = get_app_logger()
        self.error_logger = get_error_logger()

        if data is not None:
            self.config_data = copy.deepcopy(data)
            self.app_logger.info(f"使用内置配置 {config_file}")
        else:
            self._load_config()

    def _load_config(self) -> None:
        """
        加载配置文件
        """
        try:
            if not os.path.exists(self.config_file):
                self.app_logger.error(f"配置文件 {self.config_file} 不存在")
                raise FileNotFoundError(f"配置文件 {self.config_file} 不存在")

            with open(self.config_file, "r", encoding="utf-8") as file:
                self.config_data = yaml.safe_load(file) or {}

            if not isinstance(self.config_data, dict):
                raise yaml.YAMLError(f"顶层结构必须是映射，实际为 {type(self.config_data).__name__}")

            self.app_logger.info(f"成功加载配置文件 {self.config_file}")
        except yaml.YAMLError as e:
            self.error_logger.error(f"配置文件 {self.config_file} 格式错误: {e}")
            raise
        except FileNotFoundError:
            raise
        except Exception:
            from utils.logger import log_exception

            log_exception(self.error_logger, f"加载配置文件 {self.config_file} 时发生异常")
            raise

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        获取配置项的值

        Args:
            key_path (str): 配置项路径，使用点号分隔，例如 "training.step_epochs"
            default (Any): 默认值

        Returns:
            Any: 配置项的值
        """
        keys = key_path.split(".")
        value = self.config_data

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any) -> None:
        """
        设置配置项（命令行覆盖 --seed / --out 使用）

        Args:
            key_path (str): 点号分隔的配置项路径
            value (Any): 新值
        """
        keys = key_path.split(".")
        node = self.config_data
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value

    def as_dict(self) -> Dict[str, Any]:
        """返回配置树的深拷贝"""
        return copy.deepcopy(self.config_data)

    def save(self, path: str) -> None:
        """
        将当前配置写入YAML文件

        Args:
            path (str): 输出路径
        """
        with open(path, "w", encoding="utf-8") as file:
            yaml.safe_dump(self.config_data, file, allow_unicode=True, sort_keys=False)

    def reload(self) -> None:
        """
        重新加载配置文件
        """
        self._load_config()


# 全局配置管理器实例（首次访问时创建）
_config_manager: Optional[ConfigManager] = None


def load_config_manager(config_file: str = DEFAULT_CONFIG_FILE, data: Optional[Dict[str, Any]] = None) -> ConfigManager:
    """
    创建并替换全局配置管理器

    Args:
        config_file (str): 配置文件路径
        data (Optional[Dict[str, Any]]): 直接给定的配置树

    Returns:
        ConfigManager: 新的配置管理器实例
    """
    global _config_manager
    _config_manager = ConfigManager(config_file, data)
    return _config_manager


def get_config_manager() -> ConfigManager:
    """
    获取全局配置管理器实例
    默认配置文件不存在时退化为空配置，所有 get 调用返回默认值

    Returns:
        ConfigManager: 配置管理器实例
    """
    global _config_manager
    if _config_manager is None:
        if os.path.exists(DEFAULT_CONFIG_FILE):
            _config_manager = ConfigManager(DEFAULT_CONFIG_FILE)
        else:
            _config_manager = ConfigManager(DEFAULT_CONFIG_FILE, data={})
    return _config_manager
