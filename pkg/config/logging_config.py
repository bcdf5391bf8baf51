"""
日志配置模块
为 app / training / error 三个日志记录器构建 dictConfig 配置
"""

import os
from datetime import datetime

# 单个日志文件上限 10MB，保留 5 个备份
MAX_LOG_BYTES = 10485760
LOG_BACKUP_COUNT = 5


def _rotating_file_handler(log_dir: str, stem: str, level: str) -> dict:
    """
    构建按日期命名的滚动文件处理器配置

    Args:
        log_dir (str): 日志目录
        stem (str): 文件名前缀，例如 "training"
        level (str): 处理器日志级别

    Returns:
        dict: handler 配置
    """
    current_date = datetime.now().strftime("%Y-%m-%d")
    return {
        "class": "logging.handlers.RotatingFileHandler",
        "level": level,
        "formatter": "detailed",
        "filename": os.path.join(log_dir, f"{stem}_{current_date}.log"),
        "maxBytes": MAX_LOG_BYTES,
        "backupCount": LOG_BACKUP_COUNT,
        "encoding": "utf8",
    }


def get_log_config(log_dir: str = None, console_level: str = None) -> dict:
    """
    获取日志配置

    Args:
        log_dir (str): 日志目录，为空时读取配置项 logging.log_directory
        console_level (str): 控制台级别，为空时读取配置项 logging.console_level

    Returns:
        dict: 日志配置字典
    """
    if log_dir is None or console_level is None:
        # 延迟导入以避免循环依赖
        from config.config_manager import get_config_manager

        config_manager = get_config_manager()
        if log_dir is None:
            log_dir = config_manager.get("logging.log_directory", "logs")
        if console_level is None:
            console_level = config_manager.get("logging.console_level", "INFO")

    os.makedirs(log_dir, exist_ok=True)

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "detailed": {
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s",
                "datefmt": "%Y-%m-%d %H:%M:%S",
            },
            "simple": {
                "format": "%(asctime)s - %(levelname)s - %(message)s",
                "datefmt": "%H:%M:%S",
            },
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": console_level,
                "formatter": "simple",
                "stream": "ext://sys.stdout",
            },
            "app_file": _rotating_file_handler(log_dir, "app", "DEBUG"),
            "training_file": _rotating_file_handler(log_dir, "training", "DEBUG"),
            "error_file": _rotating_file_handler(log_dir, "error", "ERROR"),
        },
        "loggers": {
            "app": {
                "handlers": ["console", "app_file"],
                "level": "DEBUG",
                "propagate": False,
            },
            "training": {
                # epoch 级别的明细只写入文件
                "handlers": ["console", "training_file", "error_file"],
                "level": "DEBUG",
                "propagate": False,
            },
            "error": {
                "handlers": ["console", "error_file"],
                "level": "ERROR",
                "propagate": False,
            },
        },
        "root": {"handlers": ["console", "app_file"], "level": "WARNING"},
    }


def setup_logging(log_dir: str = None, console_level: str = None):
    """
    设置日志系统

    Args:
        log_dir (str): 可选的日志目录
        console_level (str): 可选的控制台日志级别
    """
    import logging.config

    logging.config.dictConfig(get_log_config(log_dir, console_level))
