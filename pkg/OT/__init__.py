"""
最优传输模块：对数域Sinkhorn与精确线性规划
"""
