"""
求解器模块：时间深度Nitsche法、深度Wasserstein法与DGM基线
"""
