"""
异常定义
所有业务异常继承 RisError，CLI 按类型映射退出码
"""

from typing import Optional


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME = 4


class RisError(Exception):
    """业务异常基类"""

    exit_code = EXIT_RUNTIME


class ConfigError(RisError):
    """配置错误（schema 校验失败、文件不存在等）"""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        prefix = f"{field_path}: " if field_path else ""
        super().__init__(f"{prefix}{message}")


class DomainError(RisError, ValueError):
    """数值输入超出定义域"""


class InfeasibleError(RisError):
    """策略违反约束或不存在可行解"""

    exit_code = EXIT_INFEASIBLE

    def __init__(
        self,
        message: str,
        constraint: str = "",
        frame_index: Optional[int] = None
    ):
        self.constraint = constraint
        self.frame_index = frame_index
        parts = []
        if frame_index is not None:
            parts.append(f"frame {frame_index}")
        if constraint:
            parts.append(constraint)
        prefix = f"[{' / '.join(parts)}] " if parts else ""
        super().__init__(f"{prefix}{message}")

    def at_frame(self, frame_index: int) -> "InfeasibleError":
        """附加帧序号后重新构造"""
        message = str(self).split("] ", 1)[-1]
        return InfeasibleError(message, self.constraint, frame_index)


class TrainingDivergedError(RisError):
    """训练发散（损失出现 NaN/Inf）"""

    def __init__(self, message: str, last_finite_epoch: int):
        self.last_finite_epoch = last_finite_epoch
        super().__init__(f"{message} (最后有限 epoch: {last_finite_epoch})")


class ModelFormatError(RisError):
    """模型文件格式或版本不匹配"""
