"""
ris-uav-optimizer
RIS 辅助多对 UAV-地面下行链路的仿真与优化工具：信道/SNR/容量/功耗模型、
RIS 单元分配与相位配置求解，以及多任务神经网络代理模型
"""

__version__ = "1.0.0"
