"""
运行模块：实验编排、报表合并与绘图
"""
