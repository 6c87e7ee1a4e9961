"""晶格与连续介质方程的对应: 参数映射、色散比较、Δx 细化下的演化比较、非平移不变耦合的发散"""
from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np
from tabulate import tabulate

from . import settings
from .alpha_classifier import classify, crossover_scale
from .continuum import continuum_dispersion, evolve, fourier_resample, has_nonlinearity
from .errors import (
    ClassificationError, FractionalOrderError, InstabilityError, IntegerOrderBoundaryError,
    UnsupportedConfigError,
)
from .items import (
    Boussinesq, Burgers, CorrespondenceReport, Field, FractionalDiffusion, FractionalWave, InteractionForm,
    InteractionKernel, KdV, KernelFamily, KernelWrap, LevelResult, TimeOrder, Verdict,
)
from .kernels import gap_values, kernel_spec, kernel_sum
from .lattice import discrete_dispersion, initial_profile, run_lattice, stability_bound

logger = logging.getLogger(__name__)

BOUNDARY_TOLERANCE = 1e-6


def _effective_order(alpha):
    return min(alpha, 2.0)


def map_to_continuum(config, estimate):
    """G_α = g|Δx|^{min(α,2)}，FractionalWave/Diffusion 的系数为乘积 G_α·A_α"""
    if estimate.verdict is not Verdict.ALPHA_INTERACTION:
        raise ClassificationError(f'只能映射 AlphaInteraction 核, 得到 {estimate.verdict.value}')
    if config.interaction_form is InteractionForm.NON_INVARIANT:
        raise UnsupportedConfigError('非平移不变耦合没有有限的连续极限 (见 divergence)')
    if config.extra_terms:
        return _map_two_kernel(config, estimate)
    alpha = estimate.alpha
    if abs(alpha - 1.0) < BOUNDARY_TOLERANCE:
        raise IntegerOrderBoundaryError(alpha)
    # alpha = 2.0 只来自二次主导分支 (如 nearest)，拟合出的近 2 值处于整数阶边界
    if alpha != 2.0 and abs(alpha - 2.0) <= settings.QUADRATIC_BAND:
        raise IntegerOrderBoundaryError(alpha)
    if alpha > 2.0:
        raise UnsupportedConfigError(f'alpha={alpha:g} 的单核晶格没有分数阶波动/扩散极限，需作为两核晶格的高阶项')

    order = _effective_order(alpha)
    g_alpha = config.coupling * config.dx ** order
    family = FractionalWave if config.order is TimeOrder.SECOND else FractionalDiffusion
    spec = family(
        alpha=order, ga=g_alpha * estimate.amplitude,
        nonlinearity=config.nonlinearity, on_site_force=config.on_site_force,
        g_alpha=g_alpha,
    )
    logger.debug(f'映射: alpha={order:g}, G_alpha={g_alpha:.6g}, G·A={spec.ga:.6g}')
    return spec


@dataclasses.dataclass(frozen=True)
class _Term:
    """一个耦合项及其连续系数 g·Δx^α·A"""
    nonlinearity: object
    alpha: float
    ga: float

    def order_near(self, value):
        return abs(self.alpha - value) <= settings.QUADRATIC_BAND


def _classified_terms(config, estimate):
    terms = []
    for index, (kernel, g, f) in enumerate(_lattice_terms(config)):
        est = estimate if index == 0 else classify(kernel)
        if est.verdict is not Verdict.ALPHA_INTERACTION:
            raise ClassificationError(f'第 {index + 1} 个耦合项 {kernel_spec(kernel)} 判定为 {est.verdict.value}')
        nearest = round(est.alpha)
        alpha = float(nearest) if abs(est.alpha - nearest) <= settings.QUADRATIC_BAND else est.alpha
        terms.append(_Term(f, alpha, g * config.dx ** alpha * est.amplitude))
    return terms


def _lattice_terms(config):
    yield config.kernel, config.coupling, config.nonlinearity
    for term in config.extra_terms:
        yield term.kernel, term.coupling, term.nonlinearity


def _map_two_kernel(config, estimate):
    """两核晶格: (u², α=1) + (u, α₂≤2) → Burgers；(u², α=1) + (u, α=3) → KdV；
    (u - g'u², α=2) + (u, α=4) → Boussinesq。

    奇数阶 α 按 ∂^α/∂x^α 读取 (对称核的谱只含 |k|^α，这是形式上的对应)。
    Boussinesq 只含偶数阶，对应是精确的。
    """
    if len(config.extra_terms) != 1:
        raise UnsupportedConfigError(f'只支持两个耦合项, 得到 {len(config.extra_terms) + 1} 个')
    if not config.on_site_force.is_none:
        raise UnsupportedConfigError('Burgers/KdV/Boussinesq 映射不含在位力')
    terms = _classified_terms(config, estimate)
    square = [t for t in terms if t.nonlinearity.kind == 'square']
    shifted = [t for t in terms if t.nonlinearity.kind == 'quadratic_shift']
    linear = [t for t in terms if t.nonlinearity.is_identity]

    if config.order is TimeOrder.FIRST and len(square) == 1 and len(linear) == 1:
        convective, other = square[0], linear[0]
        if not convective.order_near(1.0):
            raise UnsupportedConfigError(f'u² 项需要 α=1 的核, 得到 alpha={convective.alpha:g}')
        # ga·∂x(u²) = 2ga·u u_x
        if other.order_near(3.0):
            spec = KdV(g1=2.0 * convective.ga, g3=-other.ga)
        elif 0 < other.alpha <= 2.0 and not other.order_near(1.0):
            spec = Burgers(g1=-2.0 * convective.ga, g2=other.ga, alpha=other.alpha)
        else:
            raise UnsupportedConfigError(f'线性项的阶 alpha={other.alpha:g} 不对应 Burgers 或 KdV')
    elif config.order is TimeOrder.SECOND and len(shifted) == 1 and len(linear) == 1:
        wave, other = shifted[0], linear[0]
        if not (wave.order_near(2.0) and other.order_near(4.0)):
            raise UnsupportedConfigError(
                f'Boussinesq 需要 α=2 与 α=4 的核, 得到 {wave.alpha:g} 与 {other.alpha:g}')
        # -ga₄|k|⁴ 对应 λ 中的 +G₄k⁴
        spec = Boussinesq(g2=wave.ga, g4=-other.ga, g_prime=wave.nonlinearity.g_prime)
    else:
        raise UnsupportedConfigError('这组耦合项没有对应的 Burgers/KdV/Boussinesq 连续极限')
    logger.debug(f'两核映射: {spec}')
    return spec


def crossover_for(kernel, estimate, dx):
    """幂律核用 k₀ 的闭式；其余核取 |gap/(A|kΔx|^α) - 1| 首次超过 5% 的 k"""
    alpha = estimate.alpha
    if kernel.family is KernelFamily.POWER_LAW and alpha < 2 and abs(alpha - 1.0) > BOUNDARY_TOLERANCE:
        return crossover_scale(estimate, dx)
    q = np.geomspace(1e-6, np.pi, 2048)
    ratio = gap_values(kernel, q) / (estimate.amplitude * q ** alpha)
    off = np.nonzero(np.abs(ratio - 1.0) > settings.CROSSOVER_FALLBACK_TOLERANCE)[0]
    if off.size == 0:
        return math.pi / dx
    return float(q[off[0]]) / dx


def _single_kernel_only(config):
    if config.extra_terms:
        raise UnsupportedConfigError('比较只支持单核晶格，两核晶格请直接用 map_to_continuum')


def _discrete_multiplier(config, k):
    coeffs = config.on_site_force.coeffs
    linear_force = coeffs[1] if len(coeffs) > 1 else 0.0
    disc = discrete_dispersion(config.kernel, config.coupling, config.dx, k)
    return config.nonlinearity.linear_part() * disc + linear_force


def _metadata(config, estimate, spec):
    return {
        'lattice': {
            'n_sites': config.n_sites, 'dx': config.dx, 'coupling': config.coupling,
            'kernel': kernel_spec(config.kernel),
            'interaction_form': config.interaction_form.value,
            'order': config.order.value, 'wrap': config.wrap.value,
        },
        'estimate': estimate.as_dict(),
        'continuum': {'family': type(spec).__name__, **{
            f.name: _plain(getattr(spec, f.name)) for f in dataclasses.fields(spec)
        }},
    }


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def compare_dispersion(config, estimate, k_max_fraction=1.0, n_points=64):
    """在 k ∈ (0, fraction·k₀] 上比较 λ_disc 与 λ_cont"""
    if not 0 < k_max_fraction <= 1:
        raise ValueError(f'k_max_fraction 需在 (0, 1] 内, 得到 {k_max_fraction}')
    _single_kernel_only(config)
    spec = map_to_continuum(config, estimate)
    k0 = crossover_for(config.kernel, estimate, config.dx)
    top = min(k_max_fraction * k0, math.pi / config.dx)
    k = np.geomspace(top * 1e-3, top, int(n_points))
    discrete = _discrete_multiplier(config, k)
    continuum = continuum_dispersion(spec, k).real
    errors = np.abs(discrete - continuum) / np.abs(continuum)
    report = CorrespondenceReport(
        abscissa=k, discrete_values=discrete, continuum_values=continuum,
        error_norm=float(np.max(errors)), norm_label='max_relative', crossover_k0=k0,
        metadata=_metadata(config, estimate, spec), pointwise_errors=errors,
    )
    logger.info(f'色散比较: k₀={k0:.6g}, k ≤ {top:.6g}, 最大相对误差 {report.error_norm:.3e}')
    return report


def _relative_l2(discrete, reference):
    diff = np.linalg.norm(discrete - reference)
    norm = np.linalg.norm(reference)
    if norm == 0:
        return float(diff / math.sqrt(reference.size))
    return float(diff / norm)


def _refinement_step(lattice, t_final):
    """dt = t/ceil(t/dt_target)，dt_target = 稳定性界的 1/20"""
    target = 0.05 * stability_bound(lattice)
    if not math.isfinite(target):
        return t_final, 1
    steps = max(1, math.ceil(t_final / target))
    return t_final / steps, steps


def compare_evolution(config, estimate, profile, t_final, refinement_levels=3, reference_n=None, seed=0):
    """固定环长 L 与 G_α，逐级加倍 N (g = G_α Δx^-α)，与参考网格上的连续解比较"""
    if refinement_levels < 3:
        raise ValueError(f'refinement_levels 至少为 3, 得到 {refinement_levels}')
    if not t_final > 0:
        raise ValueError(f't_final 必须为正, 得到 {t_final}')
    if profile.strip().lower().startswith('random'):
        raise ValueError('演化比较需要光滑初始条件 (mode 或 gaussian)')
    _single_kernel_only(config)

    spec = map_to_continuum(config, estimate)
    order = _effective_order(estimate.alpha)
    length = config.circumference
    g_alpha = config.coupling * config.dx ** order

    levels, finals = [], []
    for level in range(refinement_levels):
        n = config.n_sites * 2 ** level
        dx = length / n
        lattice = dataclasses.replace(
            config, n_sites=n, dx=dx, coupling=g_alpha * dx ** -order,
            wrap=KernelWrap.PERIODIC_IMAGES,
        )
        dt, steps = _refinement_step(lattice, t_final)
        u0 = initial_profile(profile, lattice.sites, length, seed)
        logger.info(f'细化层级 {level}: N={n}, g={lattice.coupling:.6g}, dt={dt:.3e}, steps={steps}')
        try:
            run = run_lattice(lattice, u0, dt, steps)
        except InstabilityError as err:
            raise err.at_level(level) from err
        levels.append((level, n, dx, lattice.coupling, dt, steps))
        finals.append(run.final.u)

    n_ref = max(config.n_sites * 2 ** (refinement_levels - 1), int(reference_n or 0))
    x_ref = np.arange(n_ref) * (length / n_ref)
    field = Field(initial_profile(profile, x_ref, length, seed), length)
    if has_nonlinearity(spec):
        pde_dt, pde_steps = levels[-1][4], levels[-1][5]
    else:
        pde_dt, pde_steps = t_final, 1
    solution = evolve(spec, field, pde_dt, pde_steps).values.real

    results, restricted = [], None
    for (level, n, dx, g, dt, steps), u in zip(levels, finals):
        restricted = fourier_resample(solution, n)
        results.append(LevelResult(level, n, dx, g, dt, steps, _relative_l2(u, restricted)))

    errors = np.array([r.error for r in results])
    with np.errstate(divide='ignore', invalid='ignore'):
        orders = np.log2(errors[:-1] / errors[1:])
    orders[~np.isfinite(orders)] = np.nan

    logger.info('演化比较结果:\n' + tabulate(
        [[r.level, r.n_sites, f'{r.dx:.4e}', f'{r.dt:.3e}', r.steps, f'{r.error:.4e}'] for r in results],
        headers=['层级', 'N', 'dx', 'dt', '步数', '相对 L2 误差'],
    ))

    finest = results[-1]
    metadata = _metadata(config, estimate, spec)
    metadata['evolution'] = {
        'profile': profile, 't_final': t_final, 'reference_n': n_ref,
        'circumference': length, 'g_alpha': g_alpha,
    }
    return CorrespondenceReport(
        abscissa=np.arange(finest.n_sites) * finest.dx, discrete_values=finals[-1],
        continuum_values=restricted, error_norm=finest.error, norm_label='relative_l2',
        crossover_k0=crossover_for(config.kernel, estimate, finest.dx),
        metadata=metadata, levels=results, convergence_orders=orders,
    )


# ---- 非平移不变耦合的发散 ----

def _check_divergence_inputs(alpha, dx_list):
    if not 0 < alpha < 2 or alpha == 1:
        raise FractionalOrderError(f'alpha 需在 (0, 2) 且不等于 1, 得到 {alpha}')
    dx = np.asarray(dx_list, dtype=float)
    if dx.size < 4:
        raise ValueError('至少需要 4 个 dx')
    if np.any(dx <= 0) or np.any(np.diff(dx) >= 0):
        raise ValueError('dx 必须为严格递减的正数')
    if dx[0] / dx[-1] < 100:
        raise ValueError('dx 需跨越至少两个数量级')
    return dx


def divergence_terms(alpha, g_alpha, dx_list, form=InteractionForm.NON_INVARIANT):
    """均匀模式上的谱项 g·Ĵ(0) = 2gζ(α+1)，g = G_α Δx^-α；平移不变形式恒为 0"""
    dx = np.asarray(dx_list, dtype=float)
    g = g_alpha * dx ** -alpha
    kernel = InteractionKernel.power_law(alpha)
    if form is InteractionForm.INVARIANT:
        return g * gap_values(kernel, np.zeros_like(dx))
    return g * kernel_sum(kernel)


def divergence_demo(alpha, g_alpha, dx_list):
    """log(term) 对 log(Δx) 的拟合斜率，应为 -α"""
    dx = _check_divergence_inputs(alpha, dx_list)
    if not g_alpha > 0:
        raise ValueError(f'G_alpha 必须为正, 得到 {g_alpha}')
    terms = divergence_terms(alpha, g_alpha, dx)
    slope, _ = np.polyfit(np.log(dx), np.log(terms), 1)
    logger.info(f'发散拟合: alpha={alpha}, 斜率 {slope:.12f}')
    return float(slope)
