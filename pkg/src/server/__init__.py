"""FastAPI 服务器模块"""
