from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import KernelDomainError


class KernelFamily(enum.Enum):
    POWER_LAW = 'powerlaw'
    ALTERNATING_INVERSE_SQUARE = 'altinvsq'
    GRUENWALD = 'gruenwald'
    ALTERNATING_RATIONAL = 'altrational'
    INVERSE_FACTORIAL = 'invfactorial'
    NEAREST_NEIGHBOR = 'nearest'
    IDEAL_SPECTRAL = 'idealspectral'


@dataclass(frozen=True)
class InteractionKernel:
    """对称耦合族 J(n)=J(-n)，参数均无量纲"""
    family: KernelFamily
    s: Optional[float] = None
    alpha: Optional[float] = None
    a: Optional[float] = None
    amplitude: Optional[float] = None

    def __post_init__(self):
        family = self.family
        if family is KernelFamily.POWER_LAW:
            if self.s is None or not self.s > 0:
                raise KernelDomainError(f'powerlaw 需要 s > 0, 得到 s={self.s}')
        elif family is KernelFamily.GRUENWALD:
            if self.alpha is None or not self.alpha > 0:
                raise KernelDomainError(f'gruenwald 需要 alpha > 0, 得到 alpha={self.alpha}')
        elif family is KernelFamily.ALTERNATING_RATIONAL:
            if self.a is None or not math.isfinite(self.a):
                raise KernelDomainError('altrational 需要有限的参数 a')
            if float(self.a).is_integer():
                raise KernelDomainError(f'altrational 的参数 a 不能是整数 (n=±a 处除零), 得到 a={self.a}')
        elif family is KernelFamily.IDEAL_SPECTRAL:
            if self.alpha is None or not self.alpha > 0:
                raise KernelDomainError(f'idealspectral 需要 alpha > 0, 得到 alpha={self.alpha}')
            if self.amplitude is None or self.amplitude == 0 or not math.isfinite(self.amplitude):
                raise KernelDomainError('idealspectral 需要非零有限振幅')

    # 常用构造
    @classmethod
    def power_law(cls, s):
        return cls(KernelFamily.POWER_LAW, s=float(s))

    @classmethod
    def alternating_inverse_square(cls):
        return cls(KernelFamily.ALTERNATING_INVERSE_SQUARE)

    @classmethod
    def gruenwald(cls, alpha):
        return cls(KernelFamily.GRUENWALD, alpha=float(alpha))

    @classmethod
    def alternating_rational(cls, a):
        return cls(KernelFamily.ALTERNATING_RATIONAL, a=float(a))

    @classmethod
    def inverse_factorial(cls):
        return cls(KernelFamily.INVERSE_FACTORIAL)

    @classmethod
    def nearest_neighbor(cls):
        return cls(KernelFamily.NEAREST_NEIGHBOR)

    @classmethod
    def ideal_spectral(cls, alpha, amplitude):
        return cls(KernelFamily.IDEAL_SPECTRAL, alpha=float(alpha), amplitude=float(amplitude))


@dataclass(frozen=True)
class SpectrumSample:
    k: float
    value: float
    tail_bound: float = 0.0


class Verdict(enum.Enum):
    ALPHA_INTERACTION = 'AlphaInteraction'
    LOG_DIVERGENT = 'LogDivergent'
    INCONCLUSIVE = 'Inconclusive'


@dataclass(frozen=True)
class AlphaEstimate:
    alpha: float
    amplitude: float
    fit_residual: float
    k_window: Tuple[float, float]
    verdict: Verdict
    alpha_stderr: float = 0.0
    # gap ≈ A|k|^alpha + correction·k²
    correction: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f'alpha 必须为正, 得到 {self.alpha}')

    def as_dict(self):
        return {
            'alpha': self.alpha,
            'amplitude': self.amplitude,
            'residual': self.fit_residual,
            'alpha_stderr': self.alpha_stderr,
            'correction': self.correction,
            'k_window': list(self.k_window),
            'verdict': self.verdict.value,
        }


# ---- 晶格 ----

class InteractionForm(enum.Enum):
    INVARIANT = 'invariant'
    NON_INVARIANT = 'noninvariant'


class TimeOrder(enum.Enum):
    FIRST = 'first'
    SECOND = 'second'


class KernelWrap(enum.Enum):
    TRUNCATED = 'truncated'
    PERIODIC_IMAGES = 'images'


@dataclass(frozen=True)
class Nonlinearity:
    """f(u): identity, square (u²) 或 quadratic shift (u - g'u²)"""
    kind: str = 'identity'
    g_prime: float = 0.0

    def __post_init__(self):
        if self.kind not in ('identity', 'square', 'quadratic_shift'):
            raise ValueError(f'未知的非线性形式: {self.kind}')

    @property
    def is_identity(self):
        return self.kind == 'identity'

    def __call__(self, u):
        if self.kind == 'identity':
            return u
        if self.kind == 'square':
            return u * u
        return u - self.g_prime * u * u

    def linear_part(self):
        """f 中 u 的线性系数"""
        return 0.0 if self.kind == 'square' else 1.0

    def quadratic_part(self):
        """f 中 u² 的系数"""
        if self.kind == 'square':
            return 1.0
        if self.kind == 'quadratic_shift':
            return -self.g_prime
        return 0.0


IDENTITY = Nonlinearity()


@dataclass(frozen=True)
class OnSiteForce:
    """多项式在位力 F(u) = Σ coeffs[j]·u^j"""
    coeffs: Tuple[float, ...] = ()

    @classmethod
    def none(cls):
        return cls(())

    @classmethod
    def linear(cls, c):
        return cls((0.0, float(c)))

    @classmethod
    def cubic(cls, b):
        return cls((0.0, 0.0, 0.0, float(b)))

    @property
    def is_none(self):
        return not any(self.coeffs)

    def __call__(self, u):
        if self.is_none:
            return np.zeros_like(u)
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def potential(self, u):
        """V(u) = -∫F du, 使 F = -V'"""
        if self.is_none:
            return np.zeros_like(u)
        integrated = np.polynomial.polynomial.polyint(self.coeffs)
        return -np.polynomial.polynomial.polyval(u, integrated)


@dataclass(frozen=True)
class CouplingTerm:
    """附加耦合项 g_i Σ J_i(n-m)[f_i(u_n) - f_i(u_m)]"""
    kernel: InteractionKernel
    coupling: float
    nonlinearity: Nonlinearity = IDENTITY


@dataclass(frozen=True)
class LatticeConfig:
    n_sites: int
    dx: float
    coupling: float
    kernel: InteractionKernel
    interaction_form: InteractionForm = InteractionForm.INVARIANT
    nonlinearity: Nonlinearity = IDENTITY
    on_site_force: OnSiteForce = field(default_factory=OnSiteForce.none)
    order: TimeOrder = TimeOrder.SECOND
    wrap: KernelWrap = KernelWrap.TRUNCATED
    extra_terms: Tuple[CouplingTerm, ...] = ()

    def __post_init__(self):
        n = self.n_sites
        if n < 16 or n & (n - 1):
            raise ValueError(f'n_sites 必须是不小于 16 的 2 的幂, 得到 {n}')
        if not self.dx > 0:
            raise ValueError(f'dx 必须为正, 得到 {self.dx}')

    @property
    def circumference(self):
        return self.n_sites * self.dx

    @property
    def sites(self):
        return np.arange(self.n_sites) * self.dx


@dataclass
class LatticeState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self):
        return LatticeState(self.u.copy(), self.v.copy(), self.t)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass
class LatticeRun:
    """run_lattice 的结果: 快照、能量序列与测得的模式频率"""
    final: LatticeState
    dt: float
    steps: int
    snapshots: list = field(default_factory=list)
    energy_times: Optional[np.ndarray] = None
    energies: Optional[np.ndarray] = None
    # {模式编号: (测得 ω, 预测 ω)}
    mode_frequencies: dict = field(default_factory=dict)

    @property
    def energy_drift(self):
        if self.energies is None or len(self.energies) == 0:
            return None
        reference = abs(self.energies[0]) or 1.0
        return float(np.max(np.abs(self.energies - self.energies[0])) / reference)


# ---- 连续介质 ----

@dataclass
class Field:
    values: np.ndarray
    domain_length: float
    t: float = 0.0
    # 二阶时间方程的 u_t
    velocity: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        n = self.values.size
        if n < 2 or n & (n - 1):
            raise ValueError(f'网格点数必须是 2 的幂, 得到 {n}')
        if not self.domain_length > 0:
            raise ValueError('domain_length 必须为正')

    @property
    def n(self):
        return self.values.size

    @property
    def dx(self):
        return self.domain_length / self.n

    @property
    def x(self):
        return np.arange(self.n) * self.dx

    @property
    def wavenumbers(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


@dataclass(frozen=True)
class FractionalWave:
    """u_tt = GA ∂^α/∂|x|^α f(u) + F(u)"""
    alpha: float
    ga: float
    nonlinearity: Nonlinearity = IDENTITY
    on_site_force: OnSiteForce = field(default_factory=OnSiteForce.none)
    g_alpha: Optional[float] = None


@dataclass(frozen=True)
class FractionalDiffusion:
    """u_t = GA ∂^α/∂|x|^α f(u) + F(u)"""
    alpha: float
    ga: float
    nonlinearity: Nonlinearity = IDENTITY
    on_site_force: OnSiteForce = field(default_factory=OnSiteForce.none)
    g_alpha: Optional[float] = None


@dataclass(frozen=True)
class Burgers:
    """u_t + G1 u u_x - G2 ∂^α/∂|x|^α u = 0 (α=2 为经典 Burgers)"""
    g1: float
    g2: float
    alpha: float = 2.0


@dataclass(frozen=True)
class KdV:
    """u_t - G1 u u_x + G3 ∂_x ∂^β/∂|x|^β u = 0 (β=2 为经典 KdV)"""
    g1: float
    g3: float
    beta: float = 2.0


@dataclass(frozen=True)
class Boussinesq:
    """u_tt = G2 u_xx + G4 u_xxxx - g' G2 (u²)_xx"""
    g2: float
    g4: float
    g_prime: float = 0.0


@dataclass(frozen=True)
class FractionalNLS:
    """i u_t = G_α (-Δ)^{α/2} u + ω0 u + b|u|²u，复数 b 对应 Ginzburg-Landau 阻尼"""
    alpha: float
    g_alpha: float
    omega0: float = 0.0
    b: complex = 0.0


PDE_FAMILIES = (FractionalWave, FractionalDiffusion, Burgers, KdV, Boussinesq, FractionalNLS)


# ---- 对应关系报告 ----

@dataclass
class CorrespondenceReport:
    abscissa: np.ndarray
    discrete_values: np.ndarray
    continuum_values: np.ndarray
    error_norm: float
    norm_label: str
    crossover_k0: float
    metadata: dict = field(default_factory=dict)
    pointwise_errors: Optional[np.ndarray] = None
    levels: list = field(default_factory=list)
    convergence_orders: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (len(self.abscissa) == len(self.discrete_values) == len(self.continuum_values)):
            raise ValueError('报告数组长度不一致')


@dataclass(frozen=True)
class LevelResult:
    level: int
    n_sites: int
    dx: float
    coupling: float
    dt: float
    steps: int
    error: float
