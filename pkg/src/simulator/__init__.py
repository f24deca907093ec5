"""RIS 辅助 UAV 下行链路仿真：信道、通信/功耗模型、帧协议"""
