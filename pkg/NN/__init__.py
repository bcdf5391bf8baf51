"""
神经网络模块：自动微分引擎、DGM残差网络、检查点与线性特征模型
"""
