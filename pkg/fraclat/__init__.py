"""分数阶晶格 ↔ 连续介质对应的数值工具包"""
from .settings import ARTIFACT_VERSION

__version__ = ARTIFACT_VERSION
