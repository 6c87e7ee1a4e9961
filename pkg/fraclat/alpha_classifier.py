"""判定核是否为 α 相互作用，并估计 (α, A_α) 与交叉尺度 k₀"""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy import special

from . import settings
from .errors import ClassificationError, KernelDomainError
from .items import AlphaEstimate, KernelFamily, Verdict
from .kernels import gap_values, zeta

logger = logging.getLogger(__name__)


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def _loglog_fit(k, y):
    """log|y| = slope·log k + intercept 的最小二乘拟合, 返回 (slope, intercept, rms, stderr)"""
    x = np.log(k)
    z = np.log(np.abs(y))
    slope, intercept = np.polyfit(x, z, 1)
    residual = z - (slope * x + intercept)
    spread = np.sum((x - x.mean()) ** 2)
    stderr = math.sqrt(np.sum(residual ** 2) / max(len(x) - 2, 1) / spread)
    return float(slope), float(intercept), _rms(residual), stderr


def _log_residual(model, gap):
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = model / gap
    if np.any(ratio <= 0) or not np.all(np.isfinite(ratio)):
        return math.inf
    return _rms(np.log(ratio))


def _weighted_lstsq(columns, gap):
    """以 |gap| 为相对权重的线性最小二乘"""
    weight = 1.0 / np.abs(gap)
    design = np.column_stack(columns) * weight[:, None]
    coef, *_ = np.linalg.lstsq(design, gap * weight, rcond=None)
    return coef


def classify(kernel, k_window=None, n_points=None, residual_threshold=None):
    k_min, k_max = k_window or (settings.CLASSIFY_K_MIN, settings.CLASSIFY_K_MAX)
    n_points = int(n_points or settings.CLASSIFY_POINTS)
    threshold = settings.RESIDUAL_THRESHOLD if residual_threshold is None else residual_threshold
    if not 0 < k_min < k_max <= 0.5:
        raise ValueError(f'k 窗口需满足 0 < k_min < k_max ≤ 0.5, 得到 ({k_min}, {k_max})')
    if n_points < 8:
        raise ValueError(f'n_points 至少为 8, 得到 {n_points}')
    window = (float(k_min), float(k_max))

    k = np.geomspace(k_min, k_max, n_points)
    gap = gap_values(kernel, k)
    if np.any(np.abs(gap) < 1e-300):
        raise ClassificationError('谱隙在窗口内下溢 (|gap| < 1e-300)')
    if np.any(np.sign(gap) != np.sign(gap[0])):
        raise ClassificationError('谱隙在窗口内改变符号')
    sign = float(np.sign(np.median(gap)))

    # D(k) = gap(k) - 4 gap(k/2) 消去 k² 项，只留下 |k|^α (α<2) 或更高阶项
    half = gap_values(kernel, k / 2.0)
    eliminated = gap - 4.0 * half
    relative = np.abs(eliminated) / np.abs(gap)

    if np.max(relative) <= 1e-9:
        amplitude = float(np.median(gap / k ** 2))
        estimate = AlphaEstimate(
            alpha=2.0, amplitude=amplitude,
            fit_residual=_log_residual(amplitude * k ** 2, gap),
            k_window=window, verdict=Verdict.ALPHA_INTERACTION,
        )
        return _finish(kernel, estimate, threshold)

    if np.all(np.sign(eliminated) == np.sign(eliminated[0])) and np.all(eliminated != 0):
        order, _, _, stderr = _loglog_fit(k, eliminated)
    else:
        order, stderr = math.inf, 0.0

    band = settings.QUADRATIC_BAND
    if order < 2.0 - band:
        # 再消去 k⁴ 项: D(k) - 16 D(k/2)
        refined = eliminated - 16.0 * (half - 4.0 * gap_values(kernel, k / 4.0))
        if np.all(np.sign(refined) == np.sign(refined[0])) and np.all(refined != 0):
            order, _, _, stderr = _loglog_fit(k, refined)
        order = max(order, np.finfo(float).tiny)
        amplitude, correction = _weighted_lstsq([k ** order, k ** 2], gap)
        model = amplitude * k ** order + correction * k ** 2
        estimate = AlphaEstimate(
            alpha=order, amplitude=float(amplitude),
            fit_residual=_log_residual(model, gap), k_window=window,
            verdict=Verdict.ALPHA_INTERACTION, alpha_stderr=stderr,
            correction=float(correction),
        )
        return _finish(kernel, estimate, threshold)

    if order <= 2.0 + band:
        return _log_or_power(kernel, k, gap, window, threshold, sign)

    # 二次主导，带 k^order 修正
    amplitude, higher = _weighted_lstsq([k ** 2, k ** order], gap)
    # 真正二次主导时最小 k 处 A k² ≈ gap
    if abs(amplitude * k[0] ** 2 / gap[0]) <= settings.HIGHER_ORDER_TOLERANCE:
        return _higher_order(kernel, k, gap, window, threshold)
    model = amplitude * k ** 2 + higher * k ** order
    estimate = AlphaEstimate(
        alpha=2.0, amplitude=float(amplitude),
        fit_residual=_log_residual(model, gap), k_window=window,
        verdict=Verdict.ALPHA_INTERACTION,
    )
    return _finish(kernel, estimate, threshold)


def _log_or_power(kernel, k, gap, window, threshold, sign):
    """在 A k^α 与 k²(a log(1/k) + b) 两种模型之间选择"""
    slope, intercept, power_residual, stderr = _loglog_fit(k, gap)
    log_k = np.log(1.0 / k)
    a, b = _weighted_lstsq([k ** 2 * log_k, k ** 2], gap)
    log_residual = _log_residual(k ** 2 * (a * log_k + b), gap)
    separation = settings.MODEL_SEPARATION
    logger.debug(f'对数模型残差 {log_residual:.3e}, 幂律模型残差 {power_residual:.3e}')

    if log_residual * separation < power_residual:
        estimate = AlphaEstimate(
            alpha=2.0, amplitude=float(a), fit_residual=log_residual,
            k_window=window, verdict=Verdict.LOG_DIVERGENT, correction=float(b),
        )
        logger.info(f'{kernel} 的谱隙呈对数发散 k² log(1/k)')
        return estimate

    verdict = Verdict.INCONCLUSIVE
    if power_residual * separation < log_residual or power_residual <= threshold:
        verdict = Verdict.ALPHA_INTERACTION
    estimate = AlphaEstimate(
        alpha=max(slope, np.finfo(float).tiny), amplitude=sign * math.exp(intercept),
        fit_residual=power_residual, k_window=window, verdict=verdict,
        alpha_stderr=stderr,
    )
    return _finish(kernel, estimate, threshold)


def _higher_order(kernel, k, gap, window, threshold):
    """k² 项消失: gap ≈ A|k|^α (α > 2)，接近整数的阶取整"""
    slope, _, _, stderr = _loglog_fit(k, gap)
    nearest = round(slope)
    alpha = float(nearest) if abs(slope - nearest) <= settings.QUADRATIC_BAND else slope
    amplitude, _ = _weighted_lstsq([k ** alpha, k ** (alpha + 2.0)], gap)
    estimate = AlphaEstimate(
        alpha=alpha, amplitude=float(amplitude),
        fit_residual=_log_residual(amplitude * k ** alpha, gap), k_window=window,
        verdict=Verdict.ALPHA_INTERACTION, alpha_stderr=stderr,
    )
    return _finish(kernel, estimate, threshold)


def _finish(kernel, estimate, threshold):
    if estimate.verdict is Verdict.ALPHA_INTERACTION:
        bad = (estimate.fit_residual > threshold
               or not math.isfinite(estimate.amplitude) or estimate.amplitude == 0)
        if bad:
            estimate = AlphaEstimate(
                alpha=estimate.alpha, amplitude=estimate.amplitude,
                fit_residual=estimate.fit_residual, k_window=estimate.k_window,
                verdict=Verdict.INCONCLUSIVE, alpha_stderr=estimate.alpha_stderr,
                correction=estimate.correction,
            )
    logger.debug(
        f'{kernel}: alpha={estimate.alpha:.6f}, A={estimate.amplitude:.6g}, '
        f'残差={estimate.fit_residual:.2e}, 判定={estimate.verdict.value}'
    )
    return estimate


def reference_amplitude(family, order=None):
    """A_α 的闭式值，用作 classify 的检验基准"""
    family = KernelFamily(family)
    if family is KernelFamily.POWER_LAW:
        s = float(order)
        if s <= 0 or s.is_integer() and s <= 2:
            raise KernelDomainError(f'powerlaw 在 s={s} 处没有有限的 A_α (Γ 或 cos 极点/对数极点)')
        if s < 2:
            return 2.0 * float(special.gamma(-s)) * math.cos(math.pi * s / 2.0)
        return -zeta(s - 1.0)
    if family is KernelFamily.GRUENWALD:
        if not order > 0:
            raise KernelDomainError(f'gruenwald 需要 alpha > 0, 得到 {order}')
        return float(special.rgamma(order + 1.0))
    if family is KernelFamily.NEAREST_NEIGHBOR:
        return -1.0
    if family is KernelFamily.ALTERNATING_INVERSE_SQUARE:
        return 0.5
    if family is KernelFamily.INVERSE_FACTORIAL:
        return -2.0 * math.e
    raise KernelDomainError(f'{family.value} 没有只依赖阶数的 A_α 闭式')


def crossover_scale(estimate, dx):
    """k₀ = |A_α/ζ(α-1)|^{1/(2-α)} / dx"""
    alpha = estimate.alpha
    if alpha >= 2:
        raise KernelDomainError(f'alpha={alpha} ≥ 2 时不存在交叉尺度')
    if abs(alpha - 1.0) < 1e-12:
        raise KernelDomainError('alpha = 1 时交叉尺度无定义')
    if not dx > 0:
        raise ValueError(f'dx 必须为正, 得到 {dx}')
    z = zeta(alpha - 1.0)
    if z == 0 or not math.isfinite(z):
        raise KernelDomainError(f'ζ(alpha-1) 在 alpha={alpha} 处不是有限非零值')
    return abs(estimate.amplitude / z) ** (1.0 / (2.0 - alpha)) / dx
