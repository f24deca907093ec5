"""命令行入口与实验输出"""
