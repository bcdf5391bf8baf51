"""
PDE模块：区域采样、Nitsche泛函、测试问题与误差指标
"""
