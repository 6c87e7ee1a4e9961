"""相互作用核目录 J(n)、晶格谱 Ĵ(k) = 2 Σ J(n) cos(kn) 及其闭式/部分和计算"""
from __future__ import annotations

import functools
import logging
import math

import mpmath
import numpy as np
from numpy.polynomial import legendre
from scipy import special

from . import settings
from .errors import KernelDomainError, QuadratureError
from .items import InteractionKernel, KernelFamily, SpectrumSample

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# 配置文件/CLI 中的核描述语法: name[:key=value,...]
KERNEL_GRAMMAR = {
    'powerlaw': (KernelFamily.POWER_LAW, ('s',)),
    'altinvsq': (KernelFamily.ALTERNATING_INVERSE_SQUARE, ()),
    'gruenwald': (KernelFamily.GRUENWALD, ('alpha',)),
    'altrational': (KernelFamily.ALTERNATING_RATIONAL, ('a',)),
    'invfactorial': (KernelFamily.INVERSE_FACTORIAL, ()),
    'nearest': (KernelFamily.NEAREST_NEIGHBOR, ()),
    'idealspectral': (KernelFamily.IDEAL_SPECTRAL, ('alpha', 'amplitude')),
}


def parse_kernel(text):
    """解析 `powerlaw:s=1.5` 形式的核描述"""
    name, _, params = text.strip().partition(':')
    name = name.strip().lower()
    if name not in KERNEL_GRAMMAR:
        raise KernelDomainError(f'未知的核类型: {name!r}')
    family, allowed = KERNEL_GRAMMAR[name]
    values = {}
    for item in filter(None, (p.strip() for p in params.split(','))):
        key, sep, raw = item.partition('=')
        key = key.strip()
        if not sep or key not in allowed:
            raise KernelDomainError(f'核 {name} 不接受参数 {item!r}')
        if key in values:
            raise KernelDomainError(f'核 {name} 的参数 {key} 重复')
        try:
            values[key] = float(raw)
        except ValueError:
            raise KernelDomainError(f'核 {name} 的参数 {key} 不是实数: {raw!r}') from None
    missing = [key for key in allowed if key not in values]
    if missing:
        raise KernelDomainError(f'核 {name} 缺少参数: {", ".join(missing)}')
    return InteractionKernel(family, **values)


def kernel_spec(kernel):
    """parse_kernel 的逆"""
    name = kernel.family.value
    _, keys = KERNEL_GRAMMAR[name]
    if not keys:
        return name
    return name + ':' + ','.join(f'{key}={getattr(kernel, key)!r}' for key in keys)


def reduce_wavenumber(k):
    """利用 2π 周期性和偶性把 k 约化到 [0, π]"""
    k = np.asarray(k, dtype=float)
    return np.abs(np.remainder(k + np.pi, TWO_PI) - np.pi)


@functools.lru_cache(maxsize=None)
def zeta(x):
    """任意实参数的 Riemann ζ (s=1 为极点)"""
    if x == 1:
        raise KernelDomainError('ζ(1) 是极点')
    return float(mpmath.zeta(x))


def _is_integer(x):
    return float(x).is_integer()


# ---- J(n) ----

def kernel_values(kernel, n):
    """向量化的 J(n)，n 为非零整数数组"""
    n = np.asarray(n)
    if np.any(n == 0):
        raise KernelDomainError('J(n) 不在 n = 0 处定义 (排除自耦合)')
    m = np.abs(n).astype(float)
    sign = np.where(np.abs(n) % 2 == 0, 1.0, -1.0)
    family = kernel.family

    if family is KernelFamily.POWER_LAW:
        return m ** -(kernel.s + 1.0)
    if family is KernelFamily.ALTERNATING_INVERSE_SQUARE:
        return sign / (m * m)
    if family is KernelFamily.GRUENWALD:
        return _gruenwald_values(kernel.alpha, m, sign)
    if family is KernelFamily.ALTERNATING_RATIONAL:
        return sign / (kernel.a ** 2 - m * m)
    if family is KernelFamily.INVERSE_FACTORIAL:
        return special.rgamma(m + 1.0)
    if family is KernelFamily.NEAREST_NEIGHBOR:
        return np.where(m == 1, 1.0, 0.0)
    if family is KernelFamily.IDEAL_SPECTRAL:
        flat = [_ideal_kernel_value(kernel.alpha, kernel.amplitude, int(j)) for j in m.ravel()]
        return np.asarray(flat, dtype=float).reshape(m.shape)
    raise KernelDomainError(f'未知的核类型: {family}')


def _gruenwald_values(alpha, m, sign):
    half = alpha / 2.0
    # 1/Γ 在极点处为 0: 偶数 alpha 时核有限支撑
    switch = math.ceil(half) + 16
    near = m <= switch
    out = np.empty_like(m)
    out[near] = sign[near] * special.rgamma(1.0 + half + m[near]) * special.rgamma(1.0 + half - m[near])
    far = ~near
    if np.any(far):
        if _is_integer(half):
            out[far] = 0.0
        else:
            # 反射公式: J(n) = -sin(πα/2)/π · Γ(n-α/2)/Γ(n+1+α/2)
            out[far] = -math.sin(math.pi * half) / math.pi / special.poch(m[far] - half, alpha + 1.0)
    return out


def kernel_value(kernel, n):
    if int(n) != n or n == 0:
        raise KernelDomainError(f'J(n) 需要非零整数 n, 得到 {n}')
    return float(kernel_values(kernel, np.array([int(n)]))[0])


@functools.lru_cache(maxsize=8192)
def _ideal_kernel_value(alpha, amplitude, n):
    return kernel_from_spectrum(lambda k: amplitude * np.abs(k) ** alpha, n)


# ---- Ĵ(0) ----

def kernel_sum(kernel):
    """Ĵ(0) = Σ_{n≠0} J(n)"""
    family = kernel.family
    if family is KernelFamily.POWER_LAW:
        return 2.0 * float(special.zeta(1.0 + kernel.s))
    if family is KernelFamily.ALTERNATING_INVERSE_SQUARE:
        return -np.pi ** 2 / 6.0
    if family is KernelFamily.GRUENWALD:
        return -float(special.rgamma(1.0 + kernel.alpha / 2.0)) ** 2
    if family is KernelFamily.ALTERNATING_RATIONAL:
        a = kernel.a
        return np.pi / (a * math.sin(np.pi * a)) - 1.0 / a ** 2
    if family is KernelFamily.INVERSE_FACTORIAL:
        return 2.0 * (math.e - 1.0)
    if family is KernelFamily.NEAREST_NEIGHBOR:
        return 2.0
    if family is KernelFamily.IDEAL_SPECTRAL:
        return -kernel.amplitude * np.pi ** kernel.alpha / (kernel.alpha + 1.0)
    raise KernelDomainError(f'未知的核类型: {family}')


# ---- 谱隙 Ĵ(k) - Ĵ(0) ----

def gap_values(kernel, k):
    """向量化的 Ĵ(k) - Ĵ(0)，尽量使用谱隙自身的闭式以避免小 k 相消"""
    q = reduce_wavenumber(k)
    family = kernel.family

    if family is KernelFamily.POWER_LAW:
        return _power_law_gap(kernel.s, q)
    if family is KernelFamily.ALTERNATING_INVERSE_SQUARE:
        return 0.5 * q * q
    if family is KernelFamily.GRUENWALD:
        alpha = kernel.alpha
        return 2.0 ** alpha * np.sin(q / 2.0) ** alpha * float(special.rgamma(alpha + 1.0))
    if family is KernelFamily.ALTERNATING_RATIONAL:
        a = kernel.a
        return -2.0 * np.pi * np.sin(a * q / 2.0) ** 2 / (a * math.sin(np.pi * a))
    if family is KernelFamily.INVERSE_FACTORIAL:
        # Re(exp(e^{iq}) - e) 的无相消形式
        x = -2.0 * np.sin(q / 2.0) ** 2
        y = np.sin(q)
        return 2.0 * math.e * (np.expm1(x) * np.cos(y) - 2.0 * np.sin(y / 2.0) ** 2)
    if family is KernelFamily.NEAREST_NEIGHBOR:
        # 2(cos q - 1) = -4 sin²(q/2)
        return -4.0 * np.sin(q / 2.0) ** 2
    if family is KernelFamily.IDEAL_SPECTRAL:
        return kernel.amplitude * q ** kernel.alpha
    raise KernelDomainError(f'未知的核类型: {family}')


def _power_law_gap(s, q):
    if _is_integer(s):
        if int(s) % 2 == 1:
            return _bernoulli_gap(int(s), q)
        return _polylog_gap(int(s), q)
    return _expansion_gap(s, q)


@functools.lru_cache(maxsize=None)
def _expansion_coefficients(s):
    """Li_{s+1}(e^{ik}) 展开: 2ζ(s+1-2n)(-1)^n/(2n)!, n ≥ 1；|k| < 2π 内收敛"""
    coeffs = []
    for n in range(1, settings.SERIES_MAX_TERMS + 1):
        c = 2.0 * (-1) ** n * float(mpmath.zeta(s + 1.0 - 2 * n) / mpmath.factorial(2 * n))
        coeffs.append(c)
        # 包络 |c_n| π^{2n} ≤ 7 (2π)^s 4^{-n}；系数本身可能在平凡零点附近偶然很小
        if 2 * n - s >= 2 and 7.0 * TWO_PI ** s * 4.0 ** -n < settings.SERIES_TERM_FLOOR:
            break
    return 2.0 * float(special.gamma(-s)) * math.cos(np.pi * s / 2.0), np.array(coeffs)


def _expansion_gap(s, q):
    leading, coeffs = _expansion_coefficients(s)
    q2 = q * q
    # Horner: Σ c_n q^{2n}
    series = np.zeros_like(q)
    for c in coeffs[::-1]:
        series = (series + c) * q2
    return leading * q ** s + series


def _bernoulli_gap(s, q):
    """奇数 s=2m-1: 2Σcos(nk)/n^{2m} 由 Bernoulli 多项式 B_{2m}(k/2π) 给出 (0 ≤ k ≤ 2π)"""
    order = s + 1
    m = order // 2
    bern = special.bernoulli(order)
    x = q / TWO_PI
    poly = np.zeros_like(q)
    # B_{2m}(x) - B_{2m}(0): 去掉常数项
    for j in range(order):
        poly = poly + special.binom(order, j) * bern[j] * x ** (order - j)
    prefactor = (-1) ** (m - 1) * TWO_PI ** order / math.factorial(order)
    return prefactor * poly


def _polylog_gap(s, q):
    """偶数 s: 对数极点, 用扩展精度的 Re Li_{s+1}(e^{ik}) - ζ(s+1)"""
    order = s + 1
    flat = np.ravel(q)
    out = np.empty(flat.shape)
    with mpmath.workdps(settings.POLYLOG_DPS):
        base = mpmath.zeta(order)
        for i, x in enumerate(flat):
            value = mpmath.re(mpmath.polylog(order, mpmath.expj(float(x)))) - base
            out[i] = float(2 * value)
    return out.reshape(np.shape(q))


# ---- Ĵ(k) ----

def spectrum_values(kernel, k):
    """向量化的 Ĵ(k)"""
    return kernel_sum(kernel) + gap_values(kernel, k)


def spectrum(kernel, k):
    value = float(spectrum_values(kernel, np.array([k]))[0])
    return SpectrumSample(k=float(k), value=value, tail_bound=0.0)


def spectrum_gap(kernel, k):
    return float(gap_values(kernel, np.array([k]))[0])


# ---- 部分和（作为检验基准）----

def tail_bound(kernel, n_terms, k=0.0):
    """2 Σ_{n>N} J(n) cos(nk) 的上界；对 N 单调不增"""
    N = int(n_terms)
    q = float(reduce_wavenumber(k))
    family = kernel.family
    dirichlet = math.sin(q / 2.0)
    shifted = math.cos(q / 2.0)

    def _bound(absolute, first, oscillation):
        if oscillation > 1e-300:
            return 2.0 * min(absolute, first / oscillation)
        return 2.0 * absolute

    if family is KernelFamily.POWER_LAW:
        s = kernel.s
        return _bound(N ** -s / s, (N + 1.0) ** -(s + 1.0), dirichlet)
    if family is KernelFamily.ALTERNATING_INVERSE_SQUARE:
        return _bound(1.0 / N, (N + 1.0) ** -2, shifted)
    if family is KernelFamily.GRUENWALD:
        alpha = kernel.alpha
        if _is_integer(alpha / 2.0) and N >= alpha / 2.0:
            return 0.0
        nxt = abs(float(kernel_values(kernel, np.array([N + 1]))[0]))
        absolute = 1.01 * nxt * (N + 1.0) ** (alpha + 1.0) * N ** -alpha / alpha
        return _bound(absolute, nxt, dirichlet)
    if family is KernelFamily.ALTERNATING_RATIONAL:
        a = abs(kernel.a)
        if N <= 2 * a + 1:
            return math.inf
        return _bound(4.0 / (3.0 * N), 1.0 / ((N + 1.0) ** 2 - a * a), shifted)
    if family is KernelFamily.INVERSE_FACTORIAL:
        return 4.0 * float(special.rgamma(N + 2.0))
    if family is KernelFamily.NEAREST_NEIGHBOR:
        return 0.0
    raise KernelDomainError(f'{family.value} 由谱定义，没有级数形式的尾部界')


def partial_sum_spectrum(kernel, k, n_terms=None):
    """补偿求和 2 Σ_{n=1}^{N} J(n) cos(kn)，附带截断误差上界"""
    if kernel.family is KernelFamily.IDEAL_SPECTRAL:
        raise KernelDomainError('idealspectral 由谱定义，不提供部分和')
    N = int(n_terms or settings.PARTIAL_SUM_TERMS)
    n = np.arange(1, N + 1)
    terms = 2.0 * kernel_values(kernel, n) * np.cos(n * float(k))
    value = math.fsum(terms)
    rounding = 2.0 * np.finfo(float).eps * math.fsum(np.abs(terms))
    return SpectrumSample(k=float(k), value=value, tail_bound=tail_bound(kernel, N, k) + rounding)


# ---- 由谱反求 J(n) ----

def _panels(n, levels):
    """[0, π] 上的分段: 第一段向 k=0 几何加密，其余每段约含两个 cos(nk) 周期"""
    count = max(1, math.ceil(abs(n) / 4))
    width = np.pi / count
    graded = width * 2.0 ** -np.arange(levels, -1, -1)
    edges = np.concatenate(([0.0], graded, width * np.arange(2, count + 1)))
    edges[-1] = np.pi
    return edges[:-1], edges[1:]


def _cosine_quadrature(spectrum_fn, n, points):
    x, w = legendre.leggauss(points)
    a, b = _panels(n, settings.QUADRATURE_GRADING_LEVELS)
    half = (b - a)[:, None] / 2.0
    nodes = half * x[None, :] + ((a + b) / 2.0)[:, None]
    values = np.broadcast_to(np.asarray(spectrum_fn(nodes), dtype=float), nodes.shape)
    return float(np.sum(half * w[None, :] * values * np.cos(n * nodes))) / np.pi


def kernel_from_spectrum(spectrum_fn, n, quadrature_points=None):
    """J(n) = (1/π) ∫_0^π Ĵ(k) cos(nk) dk

    复合 Gauss-Legendre 求积，每段 quadrature_points 个节点。对在 (0, π] 上解析的谱,
    误差随节点数指数下降；k=0 处的 |k|^α 奇点由几何加密分段吸收，
    最内段贡献不超过 (π 2^-48)^(1+α)。以 points 与 points/2 的差作为误差自估计。
    """
    points = int(quadrature_points or settings.QUADRATURE_POINTS)
    if int(n) != n or n == 0:
        raise KernelDomainError(f'J(n) 需要非零整数 n, 得到 {n}')
    if points < 64:
        raise ValueError(f'quadrature_points 至少为 64, 得到 {points}')
    n = int(n)
    fine = _cosine_quadrature(spectrum_fn, n, points)
    coarse = _cosine_quadrature(spectrum_fn, n, points // 2)
    estimate = abs(fine - coarse)
    if estimate > settings.QUADRATURE_TOLERANCE:
        raise QuadratureError(estimate, settings.QUADRATURE_TOLERANCE)
    return fine
