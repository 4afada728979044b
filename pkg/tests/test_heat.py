import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.stats import norm

from roughdrift.errors import DomainError
from roughdrift.heat import (Mollifier, conv_weights, cutoff, heat_time_integral, heat_time_transform, kernel,
                             mollifier_weights, mollify, semigroup_apply, semigroup_values,
                             time_singular_integral, truncate_derivatives)
from roughdrift.holder import GridPath, TimeSpaceField


@given(st.floats(0.01, 5.0), st.floats(-6, 6))
def test_kernel_matches_gaussian_density(t, x):
    assert kernel(t, x) == pytest.approx(norm.pdf(x, scale=np.sqrt(t)), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_kernel_derivatives_by_finite_differences(k):
    t, x, h = 0.7, np.linspace(-3, 3, 13), 1e-4
    fd = (kernel(t, x + h, k - 1) - kernel(t, x - h, k - 1)) / (2 * h)
    assert np.allclose(kernel(t, x, k), fd, atol=1e-6)


def test_kernel_rejects_bad_input():
    with pytest.raises(DomainError):
        kernel(0.0, 1.0)
    with pytest.raises(DomainError):
        kernel(1.0, 1.0, 7)


@pytest.mark.parametrize("t", [1e-5, 1e-3, 0.05, 0.5, 2.0])
def test_weights_preserve_constants(t):
    assert conv_weights(t, 0, 0.05).sum() == pytest.approx(1.0, abs=1e-10)
    assert conv_weights(t, 1, 0.05).sum() == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_semigroup_on_sine(t, k):
    f = GridPath.from_function(np.sin, -4 * np.pi, 4 * np.pi, 800)
    out = semigroup_apply(f, t, k, extend="linear")
    x = f.x
    exact = np.exp(-t / 2) * [np.sin, np.cos, lambda z: -np.sin(z)][k](x)
    inner = np.abs(x) < 2 * np.pi
    assert np.abs(out.values[inner] - exact[inner]).max() < 1e-8


def test_semigroup_periodic_sine_whole_grid():
    L = 2 * np.pi
    x = np.arange(256) * L / 256
    out = semigroup_values(np.sin(x), L / 256, 0.3, 0, "periodic")
    assert np.allclose(out, np.exp(-0.15) * np.sin(x), atol=1e-12)


def test_semigroup_quadratic_with_linear_extension():
    f = GridPath.from_function(lambda x: x**2, -10, 10, 400)
    out = semigroup_apply(f, 0.5, 0, "linear")
    inner = np.abs(f.x) < 4
    assert np.allclose(out.values[inner], f.x[inner] ** 2 + 0.5, atol=1e-10)


def test_small_time_limit_is_identity():
    f = GridPath.from_function(np.cos, -3, 3, 300)
    out = semigroup_apply(f, 1e-8)
    # piecewise-linear weights: error of order dx * sqrt(t) * |f''|
    assert np.abs(out.values - f.values)[1:-1].max() < 2 * 0.02 * 1e-4


@given(st.floats(0.001, 1.0), st.floats(0.001, 1.0))
def test_semigroup_property(s, t):
    f = GridPath.from_function(lambda x: np.exp(-x * x), -8, 8, 320)
    a = semigroup_apply(semigroup_apply(f, s), t).values
    b = semigroup_apply(f, s + t).values
    assert np.abs(a - b)[100:220].max() < 5e-4


def test_singular_integral_closed_forms():
    assert time_singular_integral(lambda s: (s - 0.2) ** -0.5, 0.2, 1.2) == pytest.approx(2.0, rel=1e-10)
    assert time_singular_integral(lambda s: (s - 0.0) ** -0.75, 0.0, 1.0, power=0.75) == pytest.approx(4.0, rel=1e-6)
    assert time_singular_integral(lambda s: 1.0, 0.5, 0.5) == 0.0


def test_singular_integral_against_quad():
    g = lambda s: np.cos(3 * s) / np.sqrt(s - 0.1)
    ref = integrate.quad(lambda u: 2 * np.cos(3 * (0.1 + u * u)), 0, np.sqrt(0.9))[0]
    assert time_singular_integral(g, 0.1, 1.0) == pytest.approx(ref, rel=1e-8)


def test_singular_integral_gridpath_values():
    base = GridPath.from_function(np.sin, 0, 1, 10)
    out = time_singular_integral(lambda s: base.with_values(base.values / np.sqrt(s)), 0.0, 1.0)
    assert isinstance(out, GridPath)
    assert np.allclose(out.values, 2 * base.values)


def test_singular_integral_validation():
    with pytest.raises(DomainError):
        time_singular_integral(lambda s: 1.0, 0, 1, power=1.0)
    with pytest.raises(DomainError):
        time_singular_integral(lambda s: 1.0, 1, 0)


def test_heat_time_integral_constant_sine():
    N, dt = 16, 1 / 16
    F = GridPath.from_function(np.sin, -4 * np.pi, 4 * np.pi, 800)
    rows = np.tile(F.values, (N + 1, 1))
    out = heat_time_integral(rows, dt, F.dx, k=1, extend="linear")
    tau = (N - np.arange(N + 1)) * dt
    exact = 2 * (1 - np.exp(-tau / 2))[:, None] * np.cos(F.x)[None, :]
    inner = np.abs(F.x) < 2 * np.pi
    assert np.abs(out - exact)[:, inner].max() < 1e-6


def test_heat_time_transform_linear_in_time():
    # F_s = s sin x: int_t^T d^2 P_{s-t} F_s ds = -sin x int_t^T s exp(-(s-t)/2) ds
    N, dt = 8, 1 / 8
    x = np.linspace(-4 * np.pi, 4 * np.pi, 801)
    dx = x[1] - x[0]
    t = np.arange(N + 1) * dt
    F = t[:, None] * np.sin(x)[None, :]
    out = heat_time_transform(F, dt, dx, "linear")
    coef = [integrate.quad(lambda s: s * np.exp(-(s - tk) / 2), tk, 1.0)[0] for tk in t]
    exact = -np.array(coef)[:, None] * np.sin(x)[None, :]
    inner = np.abs(x) < 2 * np.pi
    assert np.abs(out - exact)[:, inner].max() < 1e-6


def test_mollifier_weights_and_validation():
    w = mollifier_weights(8, 0.01)
    assert w.sum() == pytest.approx(1.0)
    assert np.allclose(w, w[::-1])
    with pytest.raises(DomainError):
        Mollifier(0)
    with pytest.raises(DomainError):
        Mollifier(4, "box")


def test_mollify_keeps_affine_and_converges():
    x = np.linspace(-3, 3, 601)
    Y = TimeSpaceField(0.0, 1.0, -3.0, 0.01, np.vstack([2 * x + 1, np.abs(x)]))
    out = mollify(Y, 16, "linear")
    assert np.allclose(out.values[0], 2 * x + 1, atol=1e-10)
    errs = [np.abs(mollify(Y, n, "linear").values[1] - np.abs(x)).max() for n in (4, 8, 16, 32)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] == pytest.approx(np.sqrt(2 / np.pi) / 32, rel=0.05)


def test_cutoff_and_truncation():
    x = np.linspace(-5, 5, 101)
    c = cutoff(x, 2.0)
    assert np.all(c[np.abs(x) <= 2] == 1) and np.all(c[np.abs(x) >= 4] == 0)
    assert np.all((c >= 0) & (c <= 1))
    Y = TimeSpaceField(0.0, 1.0, -5.0, 0.1, np.vstack([x**3, x**3]))
    Z = truncate_derivatives(Y, 2.0)
    inner = np.abs(x) <= 2
    assert np.allclose(Z.values[:, inner], Y.values[:, inner])
    slopes = np.abs(np.diff(Z.values[0])) / 0.1
    assert slopes[np.abs(x[1:]) > 4.1].max() == 0
