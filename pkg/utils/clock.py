"""
时间工具模块
为运行元数据和日志提供带时区的时间戳
"""

from datetime import datetime

import pytz

DEFAULT_TIMEZONE = "UTC"


def get_local_time(timezone: str = DEFAULT_TIMEZONE) -> datetime:
    """
    获取指定时区的当前时间

    Args:
        timezone (str): pytz 时区名称，例如 "Asia/Shanghai"

    Returns:
        datetime: 带时区信息的当前时间
    """
    return datetime.now(pytz.timezone(timezone))


def format_timestamp(moment: datetime) -> str:
    """格式化时间戳（含时区缩写）"""
    return moment.strftime("%Y-%m-%d %H:%M:%S %Z")
