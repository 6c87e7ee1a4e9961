import math

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from fraclat.errors import KernelDomainError, QuadratureError
from fraclat.items import InteractionKernel, KernelFamily
from fraclat.kernels import (
    gap_values, kernel_from_spectrum, kernel_spec, kernel_sum, kernel_value, kernel_values,
    parse_kernel, partial_sum_spectrum, spectrum, spectrum_gap, spectrum_values, tail_bound,
)

SERIES_KERNELS = [
    InteractionKernel.power_law(0.5),
    InteractionKernel.power_law(1.5),
    InteractionKernel.power_law(2.0),
    InteractionKernel.power_law(2.5),
    InteractionKernel.alternating_inverse_square(),
    InteractionKernel.gruenwald(1.5),
    InteractionKernel.gruenwald(0.5),
    InteractionKernel.alternating_rational(0.5),
    InteractionKernel.inverse_factorial(),
    InteractionKernel.nearest_neighbor(),
]


@pytest.mark.parametrize('k', [0.1, 1.0, math.pi])
def test_alternating_inverse_square_closed_form(k):
    kernel = InteractionKernel.alternating_inverse_square()
    sample = spectrum(kernel, k)
    assert sample.tail_bound == 0.0
    assert sample.value == pytest.approx(0.5 * k * k - math.pi ** 2 / 6.0, abs=1e-8)

    partial = partial_sum_spectrum(kernel, k, 100_000)
    assert abs(partial.value - sample.value) <= partial.tail_bound


@pytest.mark.parametrize('kernel', SERIES_KERNELS, ids=kernel_spec)
@pytest.mark.parametrize('k', [0.3, 1.0, 2.5])
def test_closed_form_within_partial_sum_tail(kernel, k):
    partial = partial_sum_spectrum(kernel, k, 200_000)
    exact = spectrum(kernel, k).value
    assert abs(partial.value - exact) <= partial.tail_bound + 1e-11


CLOSED_FORM_KERNELS = SERIES_KERNELS + [
    InteractionKernel.power_law(1),
    InteractionKernel.power_law(3),
    InteractionKernel.gruenwald(3.0),
]


@pytest.mark.slow
@pytest.mark.parametrize('kernel', SERIES_KERNELS, ids=kernel_spec)
def test_closed_form_matches_partial_sum_sweep(kernel):
    for j in range(1, 61):
        k = 0.05 * j
        partial = partial_sum_spectrum(kernel, k, 1_000_000)
        exact = spectrum(kernel, k).value
        assert abs(partial.value - exact) <= max(partial.tail_bound, 1e-7), k


def test_power_law_odd_integer_polynomials():
    k = np.array([0.01, 0.5, 2.0])
    # 2Σcos(nk)/n² = π²/3 - πk + k²/2
    assert_allclose(gap_values(InteractionKernel.power_law(1), k), -math.pi * k + k * k / 2, rtol=1e-12)
    # 2Σcos(nk)/n⁴ = 2(π⁴/90 - π²k²/12 + πk³/12 - k⁴/48)
    expected = -math.pi ** 2 * k ** 2 / 6 + math.pi * k ** 3 / 6 - k ** 4 / 24
    assert_allclose(gap_values(InteractionKernel.power_law(3), k), expected, rtol=1e-12)


def test_power_law_leading_terms():
    s = 1.5
    k = 1e-6
    leading = 2.0 * math.gamma(-s) * math.cos(math.pi * s / 2.0)
    # gap = A k^s - ζ(s-1) k² + O(k⁴)
    expected = leading - float(mpmath.zeta(s - 1.0)) * k ** (2.0 - s)
    assert spectrum_gap(InteractionKernel.power_law(s), k) / k ** s == pytest.approx(expected, rel=1e-10)


def test_inverse_factorial_includes_zero_term():
    kernel = InteractionKernel.inverse_factorial()
    # 2(e^{cos k} cos(sin k) - 1)，n=0 项已扣除
    assert spectrum(kernel, math.pi / 2).value == pytest.approx(2 * math.cos(1.0) - 2, abs=1e-14)
    assert kernel_sum(kernel) == pytest.approx(2 * (math.e - 1))


def test_nearest_neighbor_spectrum():
    k = np.linspace(0, math.pi, 17)
    assert_allclose(spectrum_values(InteractionKernel.nearest_neighbor(), k), 2 * np.cos(k), atol=1e-15)


def test_gruenwald_even_order_has_finite_support():
    kernel = InteractionKernel.gruenwald(2.0)
    assert kernel_value(kernel, 1) == pytest.approx(-0.5)
    assert kernel_values(kernel, np.array([3, 10, 40])) == pytest.approx([0.0, 0.0, 0.0])
    k = np.linspace(0, math.pi, 9)
    assert_allclose(spectrum_values(kernel, k), -np.cos(k), atol=1e-14)


def test_gruenwald_far_branch_is_continuous():
    kernel = InteractionKernel.gruenwald(1.5)
    switch = math.ceil(0.75) + 16
    near, far = kernel_values(kernel, np.array([switch, switch + 1]))
    # J(n+1)/J(n) = (n - α/2)/(n + 1 + α/2)
    assert far / near == pytest.approx((switch - 0.75) / (switch + 1.75), rel=1e-12)


def test_spectrum_is_even_and_periodic():
    kernel = InteractionKernel.power_law(1.5)
    k = np.array([0.3, 1.7, 3.0])
    base = spectrum_values(kernel, k)
    assert_allclose(spectrum_values(kernel, -k), base, rtol=1e-14)
    assert_allclose(spectrum_values(kernel, k + 2 * math.pi), base, rtol=1e-12)


def test_tail_bound_is_monotone():
    kernel = InteractionKernel.power_law(0.5)
    bounds = [tail_bound(kernel, n, 0.0) for n in (10, 100, 1000, 10_000)]
    assert all(later <= earlier for earlier, later in zip(bounds, bounds[1:]))


@pytest.mark.parametrize('kernel', [
    pytest.param(kernel, marks=pytest.mark.slow) if kernel.s == 2.0 else kernel
    for kernel in CLOSED_FORM_KERNELS
], ids=kernel_spec)
def test_kernel_from_spectrum_round_trip(kernel):
    for n in range(1, 9):
        recovered = kernel_from_spectrum(lambda k: spectrum_values(kernel, k), n)
        assert recovered == pytest.approx(kernel_value(kernel, n), abs=1e-6), n


@pytest.mark.parametrize('spectrum_fn, n, expected', [
    (lambda k: -4.0 * np.sin(k / 2.0) ** 2, 1, 1.0),
    (lambda k: np.full_like(k, 3.0), 1, 0.0),
    (lambda k: np.full_like(k, 3.0), 4, 0.0),
    (lambda k: k * k, 2, 0.5),
    # (1/π)∫k² cos(nk) = 2(-1)ⁿ/n²
    (lambda k: k * k, 3, -2.0 / 9.0),
])
def test_kernel_from_spectrum_examples(spectrum_fn, n, expected):
    assert kernel_from_spectrum(spectrum_fn, n) == pytest.approx(expected, abs=1e-10)


SWEEP = 2.0 ** -np.arange(5, 21)


@pytest.mark.parametrize('kernel, alpha, amplitude', [
    (InteractionKernel.power_law(0.5), 0.5, -5.013257),
    (InteractionKernel.power_law(1.5), 1.5, -3.342253),
    (InteractionKernel.gruenwald(1.5), 1.5, 0.752253),
    (InteractionKernel.nearest_neighbor(), 2.0, -1.0),
    (InteractionKernel.power_law(3), 2.0, -math.pi ** 2 / 6),
], ids=['powerlaw0.5', 'powerlaw1.5', 'gruenwald1.5', 'nearest', 'powerlaw3'])
def test_gap_ratio_has_finite_limit(kernel, alpha, amplitude):
    ratio = gap_values(kernel, SWEEP) / SWEEP ** alpha
    offset = np.abs(ratio - amplitude)
    assert np.all(np.diff(offset) <= 1e-12)
    assert ratio[-1] == pytest.approx(amplitude, rel=1e-3)


def test_power_law_two_gap_ratio_diverges():
    # gap/k² ≈ -log(1/k) - 1.5
    ratio = gap_values(InteractionKernel.power_law(2), SWEEP) / SWEEP ** 2
    assert np.all(np.diff(np.abs(ratio)) > 0)
    assert abs(ratio[-1]) > 15.0


def test_power_law_four_gap_ratio_diverges():
    # 领头 -ζ(3)k² 有限，对数极点在 k⁴ 阶: (gap + ζ(3)k²)/k⁴ ≈ (H₄ + log(1/k))/12
    gap = gap_values(InteractionKernel.power_law(4), SWEEP)
    ratio = (gap + float(mpmath.zeta(3)) * SWEEP ** 2) / SWEEP ** 4
    assert np.all(np.diff(ratio) > 0)
    assert ratio[-1] == pytest.approx((25 / 12 + 20 * math.log(2)) / 12, rel=1e-3)


def test_kernel_from_spectrum_reports_bad_quadrature():
    with pytest.raises(QuadratureError):
        kernel_from_spectrum(lambda k: np.where(k < 1.0, 1.0, 0.0), 3)
    with pytest.raises(ValueError):
        kernel_from_spectrum(lambda k: np.abs(k), 1, quadrature_points=32)


def test_ideal_spectral_gap_is_exact():
    kernel = InteractionKernel.ideal_spectral(1.5, -2.0)
    k = np.array([1e-3, 0.2, 1.0])
    assert_allclose(gap_values(kernel, k), -2.0 * k ** 1.5, rtol=1e-15)
    with pytest.raises(KernelDomainError):
        partial_sum_spectrum(kernel, 0.5, 100)


def test_self_coupling_is_excluded():
    with pytest.raises(KernelDomainError):
        kernel_value(InteractionKernel.nearest_neighbor(), 0)


@pytest.mark.parametrize('factory', [
    lambda: InteractionKernel.power_law(0.0),
    lambda: InteractionKernel.alternating_rational(2.0),
    lambda: InteractionKernel.gruenwald(-1.0),
    lambda: InteractionKernel.ideal_spectral(1.5, 0.0),
])
def test_invalid_parameters_are_rejected(factory):
    with pytest.raises(KernelDomainError):
        factory()


def test_parse_kernel_grammar():
    kernel = parse_kernel('powerlaw:s=1.5')
    assert kernel.family is KernelFamily.POWER_LAW and kernel.s == 1.5
    assert parse_kernel(kernel_spec(kernel)) == kernel
    assert parse_kernel(' Nearest ') == InteractionKernel.nearest_neighbor()
    assert parse_kernel('idealspectral:alpha=1.2,amplitude=-1').amplitude == -1.0


@pytest.mark.parametrize('text', ['cubic', 'powerlaw', 'powerlaw:t=1', 'powerlaw:s=1,s=2', 'gruenwald:alpha=x'])
def test_parse_kernel_errors(text):
    with pytest.raises(KernelDomainError):
        parse_kernel(text)
