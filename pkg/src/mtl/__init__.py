"""多任务学习代理模型：数据集、网络、训练与推理"""
