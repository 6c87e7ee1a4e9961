class FraclatError(Exception):
    """所有 fraclat 错误的基类"""


class KernelDomainError(FraclatError, ValueError):
    """核函数参数不在定义域内，或落在极点上"""


class FractionalOrderError(FraclatError, ValueError):
    """分数阶 α 超出算子的适用范围"""


class QuadratureError(FraclatError):
    def __init__(self, estimate, tolerance):
        super().__init__(f'求积误差估计 {estimate:.3e} 超过容差 {tolerance:.1e}')
        self.estimate = estimate
        self.tolerance = tolerance


class ClassificationError(FraclatError):
    pass


class InstabilityError(FraclatError):
    """状态中出现 NaN/Inf"""

    def __init__(self, step, level=None, t=None):
        where = f'第 {step} 步'
        if level is not None:
            where = f'细化层级 {level}, ' + where
        super().__init__(f'数值不稳定: {where}出现非有限值')
        self.step = step
        self.level = level
        self.t = t

    def at_level(self, level):
        return InstabilityError(self.step, level=level, t=self.t)


class IntegerOrderBoundaryError(FraclatError):
    def __init__(self, alpha):
        super().__init__(f'alpha={alpha} 处于整数阶边界，无法映射为分数阶方程')
        self.alpha = alpha


class UnsupportedConfigError(FraclatError):
    pass


class ConfigParseError(FraclatError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f'第 {line} 行: {message}'
        super().__init__(message)
        self.line = line


class ConfigValidationError(FraclatError):
    def __init__(self, section, field, message, line=None):
        where = f'[{section}] {field}'
        if line is not None:
            where = f'第 {line} 行 {where}'
        super().__init__(f'{where}: {message}')
        self.section = section
        self.field = field
        self.line = line
