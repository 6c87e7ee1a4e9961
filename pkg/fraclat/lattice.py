"""周期环上的长程耦合振子链

约定: 方程 ü_n = g I_n(u) + F(u_n)，其中 I_n = Σ_{m≠n} J(n-m)[f(u_n) - f(u_m)]。
模式 k 振荡当且仅当 g(Ĵ(0) - Ĵ(kΔx)) < 0，即小 k 时 g·A_α > 0:
    powerlaw (0<s<2)   A_α < 0  →  需要 g < 0
    gruenwald          A_α > 0  →  需要 g > 0
    nearest            A_α = -1 →  需要 g < 0
符号不做任何隐式翻转。
"""
from __future__ import annotations

import functools
import logging
import math

import numpy as np
import scipy.fft

from . import settings
from .errors import InstabilityError, UnsupportedConfigError
from .items import (
    InteractionForm, KernelWrap, LatticeRun, LatticeState, TimeOrder,
)
from .kernels import gap_values, kernel_values, spectrum_values

logger = logging.getLogger(__name__)


# ---- 环上的核 ----

def _minimal_image_row(kernel, n_sites):
    """截断约定: c[m] = J(min(m, N-m))；|n| = N/2 的两项各取一半，合起来恰为 J(N/2)"""
    m = np.arange(1, n_sites)
    row = np.zeros(n_sites)
    row[1:] = kernel_values(kernel, np.minimum(m, n_sites - m))
    return row


@functools.lru_cache(maxsize=64)
def _ring_kernel(kernel, n_sites, wrap):
    """返回 (c, ĉ): 循环核的第一行与其 DFT (实对称)"""
    if wrap is KernelWrap.PERIODIC_IMAGES:
        # 对全部周期像求和: ĉ_j 恰为无限链的 Ĵ(2πj/N)
        theta = 2.0 * np.pi * scipy.fft.fftfreq(n_sites)
        eigen = spectrum_values(kernel, theta)
        row = scipy.fft.ifft(eigen).real
    else:
        row = _minimal_image_row(kernel, n_sites)
        eigen = scipy.fft.fft(row).real
    row.setflags(write=False)
    eigen.setflags(write=False)
    return row, eigen


def _terms(config):
    """(kernel, g, f) 列表: 主耦合在前，附加耦合项在后"""
    yield config.kernel, config.coupling, config.nonlinearity
    for term in config.extra_terms:
        yield term.kernel, term.coupling, term.nonlinearity


def _single_interaction(kernel, nonlinearity, form, wrap, u):
    n = u.size
    _, eigen = _ring_kernel(kernel, n, wrap)
    fu = nonlinearity(u)
    half = eigen[: n // 2 + 1]
    convolved = scipy.fft.irfft(half * scipy.fft.rfft(fu), n=n)
    if form is InteractionForm.NON_INVARIANT:
        return -convolved
    # S = Σ_m c[m] = ĉ_0
    return fu * eigen[0] - convolved


def interaction_term(config, u):
    """I_n = f(u_n)·S - (J ⊛ f(u))_n，O(N log N)"""
    u = np.asarray(u, dtype=float)
    return _single_interaction(
        config.kernel, config.nonlinearity, config.interaction_form, config.wrap, u,
    )


def direct_interaction_term(config, u):
    """O(N²) 直接求和，仅作检验"""
    u = np.asarray(u, dtype=float)
    n = u.size
    if config.wrap is KernelWrap.PERIODIC_IMAGES:
        row, _ = _ring_kernel(config.kernel, n, config.wrap)
    else:
        row = _minimal_image_row(config.kernel, n)
    fu = config.nonlinearity(u)
    idx = np.arange(n)
    out = np.empty(n)
    for i in range(n):
        weights = row[(i - idx) % n]
        if config.interaction_form is InteractionForm.NON_INVARIANT:
            out[i] = -math.fsum(weights * fu)
        else:
            out[i] = math.fsum(weights * (fu[i] - fu))
    return out


def coupling_force(config, u):
    """g I(u) 加上所有附加耦合项"""
    total = np.zeros_like(u, dtype=float)
    for kernel, g, f in _terms(config):
        if g:
            total += g * _single_interaction(kernel, f, config.interaction_form, config.wrap, u)
    return total


def _rate(config, u):
    return coupling_force(config, u) + config.on_site_force(u)


# ---- 时间推进 ----

def _check_dt(dt):
    if not math.isfinite(dt) or dt == 0:
        raise ValueError(f'dt 必须为非零有限值, 得到 {dt}')


def _verlet(config, u, v, a, dt):
    v_half = v + 0.5 * dt * a
    u_new = u + dt * v_half
    a_new = _rate(config, u_new)
    return u_new, v_half + 0.5 * dt * a_new, a_new


def step_second_order(config, state, dt):
    """一步速度 Verlet；dt < 0 时反向积分 (时间可逆)"""
    _check_dt(dt)
    u, v, _ = _verlet(config, state.u, state.v, _rate(config, state.u), dt)
    new = LatticeState(u, v, state.t + dt)
    if not new.is_finite():
        raise InstabilityError(1, t=new.t)
    return new


def _rk4(config, u, dt):
    k1 = _rate(config, u)
    k2 = _rate(config, u + 0.5 * dt * k1)
    k3 = _rate(config, u + 0.5 * dt * k2)
    k4 = _rate(config, u + dt * k3)
    return u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_first_order(config, state, dt):
    """一步经典 RK4: u̇ = g I(u) + F(u)"""
    _check_dt(dt)
    new = LatticeState(_rk4(config, state.u, dt), state.v.copy(), state.t + dt)
    if not new.is_finite():
        raise InstabilityError(1, t=new.t)
    return new


# ---- 色散与稳定性 ----

def discrete_dispersion(kernel, g, dx, k):
    """λ_disc(k) = g[Ĵ(0) - Ĵ(kΔx)]，k 可以是数组"""
    value = -g * gap_values(kernel, np.asarray(k, dtype=float) * dx)
    return float(value) if np.ndim(value) == 0 else value


def ring_eigenvalues(config):
    """环上各模式 (fftfreq 顺序) 在 u=0 附近的线性化乘子"""
    n = config.n_sites
    total = np.zeros(n)
    for kernel, g, f in _terms(config):
        _, eigen = _ring_kernel(kernel, n, config.wrap)
        if config.interaction_form is InteractionForm.NON_INVARIANT:
            total += -g * f.linear_part() * eigen
        else:
            total += g * f.linear_part() * (eigen[0] - eigen)
    coeffs = config.on_site_force.coeffs
    if len(coeffs) > 1:
        total += coeffs[1]
    return total


def stability_bound(config):
    """二阶: dt ≤ 2/ω_max, ω_max² = max|λ|；一阶 RK4: dt ≤ 2.8/max|λ|"""
    peak = float(np.max(np.abs(ring_eigenvalues(config))))
    if peak == 0:
        return math.inf
    if config.order is TimeOrder.SECOND:
        return 2.0 / math.sqrt(peak)
    return settings.RK4_STABILITY_LIMIT / peak


# ---- 守恒量 ----

def lattice_energy(config, state):
    """H = Σv²/2 - (g/4)ΣΣ J(n-m)(u_n-u_m)² + ΣV(u_n)，V = -∫F"""
    terms = list(_terms(config))
    if any(not f.is_identity for _, _, f in terms):
        raise UnsupportedConfigError('非线性 f(u) 没有已知的守恒能量')
    u = state.u
    kinetic = 0.5 * float(np.dot(state.v, state.v))
    # u·I(u) = ½ΣΣ J (u_n-u_m)²
    coupling = 0.0
    for kernel, g, f in terms:
        coupling -= 0.5 * g * float(np.dot(u, _single_interaction(
            kernel, f, config.interaction_form, config.wrap, u)))
    potential = float(np.sum(config.on_site_force.potential(u)))
    return kinetic + coupling + potential


# ---- 初始条件 ----

def initial_profile(text, x, length, seed=0):
    """`mode:j,amp`、`gaussian:width,amp`、`random:seed,amp` (也可省略 seed)，
    以及连续方程用的 `wave:j,amp` 与 `soliton:c,x0`"""
    kind, _, params = text.strip().partition(':')
    try:
        values = [float(p) for p in params.split(',') if p.strip()]
    except ValueError:
        raise ValueError(f'初始条件参数不是实数: {text!r}') from None
    x = np.asarray(x, dtype=float)
    kind = kind.strip().lower()

    if kind == 'mode' and len(values) == 2:
        j, amp = values
        return amp * np.cos(2.0 * np.pi * j * x / length)
    if kind == 'gaussian' and len(values) == 2:
        width, amp = values
        if not width > 0:
            raise ValueError('gaussian 宽度必须为正')
        d = x - length / 2.0
        return amp * np.exp(-0.5 * (d / width) ** 2)
    if kind == 'wave' and len(values) == 2:
        # 复平面波，仅用于 NLS
        j, amp = values
        return amp * np.exp(2j * np.pi * j * x / length)
    if kind == 'soliton' and len(values) == 2:
        # u_t + 6uu_x + u_xxx = 0 的孤立子 (c/2) sech²(√c (x - x0)/2)
        c, x0 = values
        if not c > 0:
            raise ValueError('soliton 速度必须为正')
        return 0.5 * c / np.cosh(0.5 * math.sqrt(c) * (x - x0)) ** 2
    if kind == 'random' and len(values) in (1, 2):
        if len(values) == 2:
            seed, amp = int(values[0]), values[1]
        else:
            amp = values[0]
        rng = np.random.default_rng(seed)
        return amp * rng.uniform(-1.0, 1.0, size=x.size)
    raise ValueError(f'无法识别的初始条件: {text!r}')


# ---- 完整运行 ----

def _zero_crossing_frequency(times, series):
    s = np.sign(series)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    if len(idx) < 3:
        return math.nan
    t0, t1 = times[idx], times[idx + 1]
    y0, y1 = series[idx], series[idx + 1]
    crossings = t0 - y0 * (t1 - t0) / (y1 - y0)
    return math.pi * (len(crossings) - 1) / (crossings[-1] - crossings[0])


def run_lattice(config, u0, dt, steps, v0=None, snapshot_every=0, track_modes=()):
    u = np.array(u0, dtype=float)
    if u.size != config.n_sites:
        raise ValueError(f'初始位移长度 {u.size} 与 n_sites={config.n_sites} 不一致')
    v = np.zeros_like(u) if v0 is None else np.array(v0, dtype=float)
    _check_dt(dt)
    steps = int(steps)
    if steps < 0:
        raise ValueError('steps 不能为负')

    bound = stability_bound(config)
    if abs(dt) > bound:
        logger.warning(f'dt={dt:.3e} 超过稳定性界 {bound:.3e}，可能出现数值不稳定')
    logger.info(f'晶格运行开始: N={config.n_sites}, dt={dt:.3e}, steps={steps}, order={config.order.value}')

    track_energy = (config.order is TimeOrder.SECOND
                    and all(f.is_identity for _, _, f in _terms(config)))

    times = [0.0]
    energies = [lattice_energy(config, LatticeState(u, v))] if track_energy else []
    snapshots = [LatticeState(u.copy(), v.copy(), 0.0)] if snapshot_every else []
    modes = np.asarray(track_modes, dtype=int)
    amplitudes = [scipy.fft.rfft(u)[modes].real] if modes.size else []

    a = _rate(config, u)
    t = 0.0
    for step in range(1, steps + 1):
        if config.order is TimeOrder.SECOND:
            u, v, a = _verlet(config, u, v, a, dt)
        else:
            u = _rk4(config, u, dt)
        t = step * dt
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise InstabilityError(step, t=t)
        times.append(t)
        if track_energy:
            energies.append(lattice_energy(config, LatticeState(u, v)))
        if modes.size:
            amplitudes.append(scipy.fft.rfft(u)[modes].real)
        if snapshot_every and step % snapshot_every == 0:
            snapshots.append(LatticeState(u.copy(), v.copy(), t))

    frequencies = {}
    if modes.size:
        series = np.array(amplitudes)
        eigen = ring_eigenvalues(config)
        for col, j in enumerate(modes):
            lam = eigen[j]
            predicted = math.sqrt(-lam) if lam < 0 else math.nan
            frequencies[int(j)] = (_zero_crossing_frequency(np.array(times), series[:, col]), predicted)

    run = LatticeRun(
        final=LatticeState(u, v, t), dt=dt, steps=steps, snapshots=snapshots,
        energy_times=np.array(times) if track_energy else None,
        energies=np.array(energies) if track_energy else None,
        mode_frequencies=frequencies,
    )
    if run.energies is not None:
        logger.info(f'晶格运行结束: t={t:.6g}, 相对能量漂移 {run.energy_drift:.3e}')
    else:
        logger.info(f'晶格运行结束: t={t:.6g}')
    return run
