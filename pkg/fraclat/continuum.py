"""周期区域上的伪谱求解器：分数阶波动/扩散、Burgers、KdV、Boussinesq、分数阶 NLS

线性部分在 Fourier 空间精确积分 (积分因子)，非线性部分用 RK4；二次与三次非线性项
按 2/3 规则去混叠。二阶时间方程以 (u, w=u_t) 的一阶系统推进，线性部分为精确的
2×2 旋转/双曲传播子。
"""
from __future__ import annotations

import logging
import math

import numpy as np
import scipy.fft

from . import settings
from .errors import FractionalOrderError, InstabilityError, UnsupportedConfigError
from .items import (
    Boussinesq, Burgers, Field, FractionalDiffusion, FractionalNLS, FractionalWave, KdV,
)

logger = logging.getLogger(__name__)


def _nyquist(n):
    """fftfreq 顺序中 k = -N/2 的下标"""
    return n // 2


def dealias_mask(n):
    """2/3 规则: 保留 |j| < N/3 的模式"""
    j = np.abs(scipy.fft.fftfreq(n) * n)
    return j < settings.DEALIAS_FRACTION * n / 2.0


# ---- Riesz 导数 ----

def _check_riesz_order(alpha):
    if not 0 < alpha <= 2:
        raise FractionalOrderError(f'Riesz 导数阶数需在 (0, 2] 内, 得到 {alpha}')


def riesz_derivative(field, alpha):
    """F⁻¹{-|k|^α F{u}}"""
    _check_riesz_order(alpha)
    k = field.wavenumbers
    spectrum = -np.abs(k) ** alpha * scipy.fft.fft(field.values)
    return Field(scipy.fft.ifft(spectrum), field.domain_length, field.t)


def gl_riesz_stencil(alpha, n, dx):
    """平移 Grünwald-Letnikov 的 Riesz 循环模板 (第一行)

    D₊ 与 D₋ 各自以 w_j = (-1)^j C(α, j) 作权重并向右/左平移一格，
    截断在 GL_IMAGE_PERIODS 个周期后折叠到环上。截断残余和均匀摊到各元素，
    只改变 0 模式，使总和为 0。
    """
    if not 0 < alpha <= 2:
        raise FractionalOrderError(f'Grünwald-Letnikov 阶数需在 (0, 2] 内, 得到 {alpha}')
    cos_term = math.cos(math.pi * alpha / 2.0)
    if abs(cos_term) < 1e-12:
        raise FractionalOrderError('alpha = 1 是前因子 -1/(2cos(πα/2)) 的极点')
    count = settings.GL_IMAGE_PERIODS * n
    j = np.arange(1, count)
    weights = np.concatenate(([1.0], np.cumprod(1.0 - (alpha + 1.0) / j)))
    shift = np.arange(count) - 1
    forward = np.bincount(shift % n, weights=weights, minlength=n)
    backward = np.bincount(-shift % n, weights=weights, minlength=n)
    row = -(forward + backward) / (2.0 * cos_term) * dx ** -alpha
    row -= math.fsum(row) / n
    return row


def riesz_gl_reference(samples, alpha, dx):
    """Riesz 导数的 Grünwald-Letnikov 实空间近似，一阶精度，仅用于交叉检验"""
    if not 1 < alpha < 2:
        raise FractionalOrderError(f'riesz_gl_reference 需要 1 < alpha < 2, 得到 {alpha}')
    if abs(alpha - 1.0) < settings.GL_ALPHA_GAP:
        raise FractionalOrderError(f'alpha={alpha} 距极点 1 过近 (需 |alpha-1| ≥ {settings.GL_ALPHA_GAP})')
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    eigen = scipy.fft.rfft(gl_riesz_stencil(alpha, n, dx))
    # 归一化后模板总和为 0
    eigen[0] = 0.0
    return scipy.fft.irfft(eigen * scipy.fft.rfft(samples), n=n)


# ---- 方程族 ----

REAL_FAMILIES = (FractionalWave, FractionalDiffusion, Burgers, KdV, Boussinesq)
SECOND_ORDER_FAMILIES = (FractionalWave, Boussinesq)


def time_order(spec):
    return 2 if isinstance(spec, SECOND_ORDER_FAMILIES) else 1


def _check_spec(spec):
    if isinstance(spec, (FractionalWave, FractionalDiffusion, FractionalNLS)):
        _check_riesz_order(spec.alpha)
    elif isinstance(spec, Burgers):
        _check_riesz_order(spec.alpha)
    elif isinstance(spec, KdV):
        _check_riesz_order(spec.beta)
    elif not isinstance(spec, Boussinesq):
        raise UnsupportedConfigError(f'未知的方程族: {type(spec).__name__}')


def _linear_on_site(force):
    coeffs = force.coeffs
    return coeffs[1] if len(coeffs) > 1 else 0.0


def _linear_multiplier(spec, k):
    """λ(k)，zero_nyquist 由调用方处理"""
    k = np.asarray(k, dtype=float)
    if isinstance(spec, (FractionalWave, FractionalDiffusion)):
        linear_f = spec.nonlinearity.linear_part()
        return (-spec.ga * linear_f * np.abs(k) ** spec.alpha
                + _linear_on_site(spec.on_site_force)).astype(complex)
    if isinstance(spec, Burgers):
        return (-spec.g2 * np.abs(k) ** spec.alpha).astype(complex)
    if isinstance(spec, KdV):
        return 1j * spec.g3 * k * np.abs(k) ** spec.beta
    if isinstance(spec, Boussinesq):
        return (-spec.g2 * k ** 2 + spec.g4 * k ** 4).astype(complex)
    if isinstance(spec, FractionalNLS):
        return -1j * (spec.g_alpha * np.abs(k) ** spec.alpha + spec.omega0)
    raise UnsupportedConfigError(f'未知的方程族: {type(spec).__name__}')


def continuum_dispersion(spec, k):
    """线性模式乘子 λ_cont(k)；Boussinesq 给出在 u=0 处的线性化"""
    _check_spec(spec)
    value = _linear_multiplier(spec, k)
    return complex(value) if np.ndim(value) == 0 else value


class _Nonlinear:
    """非线性项 N(Y)，Y 为 (m, N) 的 Fourier 系数"""

    def __init__(self, spec, k, mask):
        self.spec = spec
        self.ik = 1j * k
        self.ik[_nyquist(k.size)] = 0.0
        self.k = k
        self.mask = mask
        self.real = isinstance(spec, REAL_FAMILIES)
        self.active = self._is_active()

    def _is_active(self):
        spec = self.spec
        if isinstance(spec, (FractionalWave, FractionalDiffusion)):
            coeffs = list(spec.on_site_force.coeffs)
            if len(coeffs) > 1:
                coeffs[1] = 0.0
            return spec.nonlinearity.quadratic_part() != 0 or any(coeffs)
        if isinstance(spec, (Burgers, KdV)):
            return spec.g1 != 0
        if isinstance(spec, Boussinesq):
            return spec.g_prime != 0 and spec.g2 != 0
        return spec.b != 0

    def _physical(self, coeffs):
        u = scipy.fft.ifft(coeffs * self.mask)
        return u.real if self.real else u

    def _spectral(self, values):
        return scipy.fft.fft(values) * self.mask

    def __call__(self, y):
        out = np.zeros_like(y)
        if not self.active:
            return out
        spec = self.spec
        u = self._physical(y[0])
        if isinstance(spec, (FractionalWave, FractionalDiffusion)):
            q = spec.nonlinearity.quadratic_part()
            coeffs = list(spec.on_site_force.coeffs)
            if len(coeffs) > 1:
                coeffs[1] = 0.0
            term = np.zeros(y.shape[1], dtype=complex)
            if q:
                term += -spec.ga * q * np.abs(self.k) ** spec.alpha * self._spectral(u * u)
            if any(coeffs):
                term += self._spectral(np.polynomial.polynomial.polyval(u, coeffs))
            out[-1] = term
        elif isinstance(spec, Burgers):
            out[0] = -0.5 * spec.g1 * self.ik * self._spectral(u * u)
        elif isinstance(spec, KdV):
            out[0] = 0.5 * spec.g1 * self.ik * self._spectral(u * u)
        elif isinstance(spec, Boussinesq):
            out[1] = spec.g_prime * spec.g2 * self.k ** 2 * self._spectral(u * u)
        else:
            out[0] = -1j * spec.b * self._spectral(np.abs(u) ** 2 * u)
        return out


def has_nonlinearity(spec):
    k = np.zeros(1)
    return _Nonlinear(spec, k, np.ones(1, dtype=bool)).active


def _propagator(lam, tau, order):
    """(m, m, N) 线性传播子 exp(L τ)"""
    if order == 1:
        return np.exp(lam * tau)[None, None, :]
    s = np.sqrt(lam + 0j)
    zero = s == 0
    safe = np.where(zero, 1.0, s)
    ch = np.cosh(s * tau)
    sh = np.sinh(s * tau)
    return np.array([
        [ch, np.where(zero, tau, sh / safe)],
        [s * sh, ch],
    ])


def _apply(prop, y):
    return np.einsum('ijn,jn->in', prop, y)


def _nonlinear_rate(spec, field):
    """非线性项刚度的粗略估计，用于稳定性警告"""
    amp = float(np.max(np.abs(field.values))) if field.n else 0.0
    k_max = math.pi / field.dx * settings.DEALIAS_FRACTION
    if isinstance(spec, (Burgers, KdV)):
        return abs(spec.g1) * amp * k_max
    if isinstance(spec, Boussinesq):
        return math.sqrt(abs(spec.g_prime * spec.g2) * amp) * k_max
    if isinstance(spec, FractionalNLS):
        return abs(spec.b) * amp ** 2
    q = spec.nonlinearity.quadratic_part()
    return math.sqrt(abs(spec.ga * q) * amp * k_max ** spec.alpha)


def evolve(spec, field, dt, steps):
    """积分因子 RK4 推进 steps 步，返回新的 Field"""
    _check_spec(spec)
    steps = int(steps)
    if steps < 0:
        raise ValueError('steps 不能为负')
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError(f'dt 必须为正, 得到 {dt}')
    order = time_order(spec)
    real = isinstance(spec, REAL_FAMILIES)
    values = field.values
    if real:
        scale = max(float(np.max(np.abs(values))), 1.0)
        if np.max(np.abs(values.imag)) > 1e-12 * scale:
            raise ValueError(f'{type(spec).__name__} 是实方程，初始场的虚部必须为 0')

    if steps == 0:
        return Field(values.copy(), field.domain_length, field.t,
                     None if field.velocity is None else np.array(field.velocity, copy=True))

    n = field.n
    k = field.wavenumbers
    lam = _linear_multiplier(spec, k)
    if isinstance(spec, KdV):
        lam[_nyquist(n)] = 0.0
    nonlinear = _Nonlinear(spec, k, dealias_mask(n))

    rate = _nonlinear_rate(spec, field) if nonlinear.active else 0.0
    if rate * dt > settings.RK4_STABILITY_LIMIT:
        logger.warning(f'dt={dt:.3e} 可能超过非线性项的显式稳定界 (估计 {settings.RK4_STABILITY_LIMIT / rate:.3e})')

    rows = [scipy.fft.fft(values)]
    if order == 2:
        velocity = np.zeros(n) if field.velocity is None else field.velocity
        rows.append(scipy.fft.fft(np.asarray(velocity, dtype=complex)))
    y = np.array(rows)

    full = _propagator(lam, dt, order)
    half = _propagator(lam, dt / 2.0, order)
    logger.debug(f'{type(spec).__name__}: N={n}, dt={dt:.3e}, steps={steps}')

    for step in range(1, steps + 1):
        if nonlinear.active:
            a = nonlinear(y)
            b = nonlinear(_apply(half, y + 0.5 * dt * a))
            c = nonlinear(_apply(half, y) + 0.5 * dt * b)
            d = nonlinear(_apply(full, y) + dt * _apply(half, c))
            y = _apply(full, y) + dt / 6.0 * (_apply(full, a) + 2.0 * _apply(half, b + c) + d)
        else:
            y = _apply(full, y)
        if not np.all(np.isfinite(y)):
            raise InstabilityError(step, t=field.t + step * dt)

    out = scipy.fft.ifft(y, axis=-1)
    if real:
        out = out.real
    velocity = out[1] if order == 2 else None
    return Field(out[0], field.domain_length, field.t + steps * dt, velocity)


# ---- 网格间的 Fourier 插值 ----

def fourier_resample(values, n):
    """三角插值多项式在 n 点等距网格上的取值 (n 与原网格均为 2 的幂)"""
    values = np.asarray(values)
    src = values.size
    if n == src:
        return values.copy()
    if n < src:
        # 粗网格是细网格的子集，插值多项式在网格点上等于原值
        return values[:: src // n].copy()
    coeffs = scipy.fft.fft(values)
    padded = np.zeros(n, dtype=complex)
    half = src // 2
    padded[:half] = coeffs[:half]
    padded[n - half + 1:] = coeffs[half + 1:]
    # 原 Nyquist 模式平分到 ±N/2
    padded[half] = 0.5 * coeffs[half]
    padded[n - half] = 0.5 * coeffs[half]
    out = scipy.fft.ifft(padded) * (n / src)
    return out.real if np.isrealobj(values) else out
