# -*- coding: utf-8 -*-

import logging

import pytest
import torch

from NN.network import Architecture, init_xavier

NAMED_LOGGERS = ("app", "training", "error")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行标记为 slow 的训练复现测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _reset_loggers():
    """命令行测试会调用 dictConfig；结束后恢复传播，caplog 才能继续捕获"""
    yield
    for name in NAMED_LOGGERS:
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)
        logger.propagate = True
        logger.setLevel(logging.NOTSET)


@pytest.fixture
def small_net():
    """d = 2 的小网络：1 个块，宽 6，tanh"""
    return init_xavier(Architecture(2, 1, blocks=1, width=6, activation="tanh"), seed=7)
