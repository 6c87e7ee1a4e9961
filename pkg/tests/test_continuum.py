import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fraclat.continuum import (
    continuum_dispersion, dealias_mask, evolve, fourier_resample, gl_riesz_stencil, has_nonlinearity,
    riesz_derivative, riesz_gl_reference, time_order,
)
from fraclat.errors import FractionalOrderError, InstabilityError, UnsupportedConfigError
from fraclat.items import (
    Boussinesq, Burgers, Field, FractionalDiffusion, FractionalNLS, FractionalWave, KdV, Nonlinearity,
)


def _grid(n, length=2 * math.pi):
    return np.arange(n) * (length / n)


# ---- Riesz 导数 ----

@pytest.mark.parametrize('alpha', [0.5, 1.5, 2.0])
def test_riesz_eigenrelation(alpha):
    n = 1024
    x = _grid(n)
    for j in range(-n // 2 + 1, n // 2):
        wave = np.exp(1j * j * x)
        derivative = riesz_derivative(Field(wave, 2 * math.pi), alpha).values
        # 舍入误差经乘子放大，按算子范数 (N/2)^α 归一
        error = np.linalg.norm(derivative + abs(j) ** alpha * wave)
        assert error <= 1e-12 * (n / 2) ** alpha * np.linalg.norm(wave), j
    mode = np.cos(3 * x)
    assert_allclose(riesz_derivative(Field(mode, 2 * math.pi), alpha).values.real,
                    -3 ** alpha * mode, atol=1e-12 * 3 ** alpha)


def test_riesz_examples():
    x = _grid(64)
    assert_allclose(riesz_derivative(Field(np.sin(2 * x), 2 * math.pi), 1.5).values.real,
                    -2 ** 1.5 * np.sin(2 * x), atol=1e-13)
    assert_allclose(riesz_derivative(Field(np.sin(x), 2 * math.pi), 2.0).values.real, -np.sin(x), atol=1e-13)
    assert_allclose(riesz_derivative(Field(np.full(64, 3.0), 2 * math.pi), 0.7).values, 0.0, atol=1e-13)


@pytest.mark.parametrize('alpha', [0.0, -1.0, 2.5])
def test_riesz_order_range(alpha):
    with pytest.raises(FractionalOrderError):
        riesz_derivative(Field(np.zeros(16), 1.0), alpha)


def _gl_error(n, alpha):
    x = _grid(n)
    u = np.exp(0.5 * np.cos(x))
    spectral = riesz_derivative(Field(u, 2 * math.pi), alpha).values.real
    approx = riesz_gl_reference(u, alpha, 2 * math.pi / n)
    return np.linalg.norm(approx - spectral) / np.linalg.norm(spectral)


@pytest.mark.parametrize('alpha', [1.2, 1.5, 1.8])
def test_grunwald_letnikov_agrees_with_spectral(alpha):
    coarse = _gl_error(1024, alpha)
    fine = _gl_error(2048, alpha)
    assert coarse <= 1e-2
    assert fine < coarse
    # 一阶精度
    assert fine / coarse == pytest.approx(0.5, abs=0.05)


def test_grunwald_letnikov_second_order_is_three_point():
    row = gl_riesz_stencil(2.0, 16, 0.5)
    expected = np.zeros(16)
    expected[[0, 1, -1]] = [-8.0, 4.0, 4.0]
    assert_allclose(row, expected, atol=1e-12)


def test_grunwald_letnikov_annihilates_constants():
    assert_allclose(riesz_gl_reference(np.full(256, 2.0), 1.5, 0.1), 0.0, atol=1e-10)
    assert math.fsum(gl_riesz_stencil(1.3, 256, 0.1)) == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize('alpha', [1.0, 1.02, 2.0, 0.5])
def test_grunwald_letnikov_order_range(alpha):
    with pytest.raises(FractionalOrderError):
        riesz_gl_reference(np.zeros(64), alpha, 0.1)


# ---- 方程族的线性部分 ----

def test_continuum_dispersion_examples():
    assert continuum_dispersion(KdV(g1=0.0, g3=1.0), 2.0) == pytest.approx(8j)
    assert continuum_dispersion(Burgers(g1=1.0, g2=2.0), 2.0) == pytest.approx(-8.0)
    assert continuum_dispersion(FractionalDiffusion(1.5, 1.0), 4.0) == pytest.approx(-8.0)
    assert continuum_dispersion(FractionalNLS(2.0, 1.0, omega0=0.5), 2.0) == pytest.approx(-4.5j)
    assert_allclose(continuum_dispersion(Boussinesq(g2=1.0, g4=-0.1), np.array([0.0, 1.0])), [0.0, -1.1])


def test_time_order_and_nonlinearity():
    assert time_order(FractionalWave(1.5, 1.0)) == 2
    assert time_order(Boussinesq(1.0, -0.1)) == 2
    assert time_order(KdV(1.0, 1.0)) == 1
    assert not has_nonlinearity(FractionalWave(1.5, 1.0))
    assert has_nonlinearity(FractionalWave(1.5, 1.0, nonlinearity=Nonlinearity('quadratic_shift', 0.2)))
    assert has_nonlinearity(FractionalNLS(1.5, 1.0, b=1.0))
    assert not has_nonlinearity(Burgers(0.0, 1.0))


def test_dealias_mask_keeps_two_thirds():
    mask = dealias_mask(64)
    assert mask.sum() == 43
    assert mask[21] and not mask[22]


# ---- 时间推进 ----

def test_zero_steps_is_identity():
    field = Field(np.sin(_grid(32)), 2 * math.pi, t=1.5)
    out = evolve(Burgers(1.0, 0.1), field, 0.1, 0)
    assert_allclose(out.values, field.values)
    assert out.t == 1.5
    assert out.values is not field.values


def test_linear_burgers_decay():
    x = _grid(64)
    out = evolve(Burgers(g1=0.0, g2=1.0), Field(np.sin(x), 2 * math.pi), 0.1, 10)
    assert_allclose(out.values.real, math.exp(-1.0) * np.sin(x), atol=1e-12)
    assert out.t == pytest.approx(1.0)


def test_fractional_diffusion_decay():
    x = _grid(64)
    out = evolve(FractionalDiffusion(1.5, 1.0), Field(np.cos(2 * x), 2 * math.pi), 0.5, 2)
    assert_allclose(out.values.real, math.exp(-2 ** 1.5) * np.cos(2 * x), atol=1e-12)
    assert out.velocity is None


def test_linear_kdv_phase():
    x = _grid(64)
    g3 = 0.7
    # KdV 只接受实数据，用 cos x = Re e^{ix} 代替复平面波；两个分量都平移 g3·t
    out = evolve(KdV(g1=0.0, g3=g3), Field(np.cos(x), 2 * math.pi), 0.25, 4)
    assert_allclose(out.values.real, np.cos(x + g3 * 1.0), atol=1e-12)


def test_fractional_wave_rotation():
    x = _grid(64)
    omega = 2 ** 0.75
    out = evolve(FractionalWave(1.5, 1.0), Field(np.cos(2 * x), 2 * math.pi), 0.5, 3)
    assert_allclose(out.values.real, np.cos(2 * x) * math.cos(omega * 1.5), atol=1e-12)
    assert_allclose(out.velocity, -omega * np.sin(omega * 1.5) * np.cos(2 * x), atol=1e-12)


def test_boussinesq_rotation():
    x = _grid(64)
    omega = math.sqrt(1.1)
    out = evolve(Boussinesq(g2=1.0, g4=-0.1), Field(np.cos(x), 2 * math.pi), 2.0, 1)
    assert_allclose(out.values.real, np.cos(x) * math.cos(2 * omega), atol=1e-10)
    assert_allclose(out.velocity, -omega * math.sin(2 * omega) * np.cos(x), atol=1e-10)


def test_nls_plane_wave():
    x = _grid(64)
    spec = FractionalNLS(alpha=1.5, g_alpha=1.0, omega0=0.2, b=0.5)
    out = evolve(spec, Field(np.exp(1j * x), 2 * math.pi), 0.01, 100)
    assert_allclose(out.values, np.exp(1j * (x - (1.0 + 0.2 + 0.5) * 1.0)), atol=1e-10)


def test_burgers_self_convergence_and_mass():
    x = _grid(128)
    spec = Burgers(g1=1.0, g2=0.1)
    field = Field(0.5 * np.sin(x) + 0.2, 2 * math.pi)
    coarse = evolve(spec, field, 0.01, 50)
    fine = evolve(spec, field, 0.005, 100)
    assert np.max(np.abs(coarse.values - fine.values)) <= 1e-6
    assert np.sum(coarse.values.real) == pytest.approx(np.sum(field.values.real), abs=1e-10)


def test_kdv_soliton():
    length = 40.0
    x = _grid(256, length)
    spec = KdV(g1=-6.0, g3=1.0)
    start = Field(0.5 * 4.0 / np.cosh(x - 20.0) ** 2, length)
    half = evolve(spec, start, 5e-4, 1000)
    out = evolve(spec, start, 2.5e-4, 2000)
    assert np.max(np.abs(half.values - out.values)) <= 1e-6
    assert np.sum(out.values.real ** 2) == pytest.approx(np.sum(start.values.real ** 2), rel=1e-6)
    assert np.sum(out.values.real) == pytest.approx(np.sum(start.values.real), abs=1e-10)
    # 速度 c = 4
    assert_allclose(out.values.real, 2.0 / np.cosh(x - 22.0) ** 2, atol=1e-4)


def test_real_family_rejects_complex_data():
    with pytest.raises(ValueError):
        evolve(Burgers(1.0, 0.1), Field(np.exp(1j * _grid(16)), 2 * math.pi), 0.1, 1)


def test_invalid_arguments():
    field = Field(np.zeros(16), 1.0)
    with pytest.raises(ValueError):
        evolve(Burgers(1.0, 0.1), field, 0.0, 1)
    with pytest.raises(FractionalOrderError):
        evolve(FractionalDiffusion(2.5, 1.0), field, 0.1, 1)
    with pytest.raises(UnsupportedConfigError):
        evolve(object(), field, 0.1, 1)


def test_blow_up_is_reported(rng):
    field = Field(rng.standard_normal(64), 2 * math.pi)
    with pytest.raises(InstabilityError) as excinfo:
        evolve(FractionalDiffusion(2.0, -1.0), field, 1.0, 5)
    assert excinfo.value.step == 1


# ---- 重采样 ----

def test_fourier_resample():
    coarse = np.cos(3 * _grid(16)) + 0.5 * np.cos(8 * _grid(16))
    fine = fourier_resample(coarse, 64)
    assert_allclose(fine, np.cos(3 * _grid(64)) + 0.5 * np.cos(8 * _grid(64)), atol=1e-13)
    assert_allclose(fourier_resample(fine, 16), coarse, atol=1e-13)
    assert fourier_resample(coarse, 16) is not coarse
