import json

import numpy as np
import pytest
from scipy import integrate

from roughdrift.environment import Environment
from roughdrift.errors import DomainError
from roughdrift.fbm import fbm_path
from roughdrift.holder import GridPath, TimeSpaceField
from roughdrift.lift import (JointRegularityWarning, assemble_lift, build_Z, cross_integral_homogeneous,
                             cross_integral_inhomogeneous, fitted_joint_exponents, geometric_cauchy_study)


def field(func, a=3.0, M=120, nt=32, T=1.0):
    return Environment.from_function(func, T, nt, -a, a, M).Y


def test_Z_of_quadratic_is_twice_remaining_time():
    Y = field(lambda t, x: x**2 + 0 * t)
    Z = build_Z(Y, 1.0, "quadratic")
    assert np.abs(Z.values - 2 * (1 - Y.t)[:, None]).max() < 1e-10


def test_Z_of_homogeneous_sine_and_split():
    Y = field(lambda t, x: np.sin(x) + 0 * t, a=6 * np.pi, M=1200)
    Z, Z1, Z2 = build_Z(Y, 1.0, "linear", split=True)
    tau = 1 - Y.t
    exact = 2 * (np.exp(-tau / 2) - 1)[:, None] * np.sin(Y.x)[None, :]
    inner = np.abs(Y.x) < 3 * np.pi
    assert np.abs(Z.values - exact)[:, inner].max() < 1e-9
    assert np.abs(Z2.values).max() < 1e-9


def test_Z_time_dependent_closed_form():
    Y = field(lambda t, x: np.exp(-t) * np.sin(x), a=6 * np.pi, M=1200, nt=64)
    Z = build_Z(Y, 1.0, "linear")
    t = Y.t
    coef = -np.exp(t / 2) * (2 / 3) * (np.exp(-1.5 * t) - np.exp(-1.5))
    exact = coef[:, None] * np.sin(Y.x)[None, :]
    inner = np.abs(Y.x) < 3 * np.pi
    # linear-in-time interpolation of exp(-t) costs O(dt^2)
    assert np.abs(Z.values - exact)[:, inner].max() < 1e-4


def test_Z_horizon_must_be_on_grid():
    Y = field(lambda t, x: x + 0 * t)
    with pytest.raises(DomainError):
        build_Z(Y, 0.3)
    Z = build_Z(Y, 0.5)
    assert Z.N == 16 and np.abs(Z.values[-1]).max() == 0


def test_cross_integral_homogeneous_linear_is_zero():
    for t in (0.0, 0.4, 0.95):
        I = cross_integral_homogeneous(GridPath.from_function(lambda x: 2 * x, -3, 3, 120), t, 1.0, "linear")
        assert np.abs(I.values).max() < 1e-10


def test_cross_integral_homogeneous_against_quadrature():
    Yp = GridPath.from_function(np.sin, -4 * np.pi, 4 * np.pi, 1600)
    t, T = 0.2, 1.0
    I = cross_integral_homogeneous(Yp, t, T, "linear")
    z1 = lambda y: 2 * (np.exp(-(T - t) / 2) - 1) * np.sin(y)
    for i, j in [(700, 760), (790, 900), (820, 821)]:
        x, xp = Yp.x[i], Yp.x[j]
        ref = integrate.quad(lambda y: (z1(y) - z1(x)) * np.cos(y), x, xp)[0]
        assert I.values[i, j] == pytest.approx(ref, abs=5e-6)


def test_cross_integral_inhomogeneous_against_quadrature():
    Y = field(lambda t, x: np.exp(-t) * np.sin(x), a=3.0, M=600, nt=16)
    _, _, Z2 = build_Z(Y, 1.0, "linear", split=True)
    I = cross_integral_inhomogeneous(Y, 0.25, 1.0, "linear", Z2=Z2)
    k = 4
    z2 = lambda y: np.interp(y, Y.x, Z2.values[k])
    dY = lambda y: np.exp(-0.25) * np.cos(y)
    for i, j in [(100, 400), (250, 260)]:
        x, xp = Y.x[i], Y.x[j]
        ref = integrate.quad(lambda y: (z2(y) - z2(x)) * dY(y), x, xp, limit=400, epsabs=1e-9)[0]
        assert I.values[i, j] == pytest.approx(ref, abs=1e-5)


def test_smooth_lift_chen_and_components():
    Y = field(lambda t, x: np.exp(-t) * np.sin(x))
    lift = assemble_lift(Y, 1.0)
    assert lift.chen_defect_max() <= 1e-6
    assert lift.diagnostics["status"] == "young"
    WW = lift.WW(3).values
    dy = Y.values[3][None, :] - Y.values[3][:, None]
    assert np.allclose(WW[..., 0, 0], 0.5 * dy**2)
    assert np.allclose(WW[..., 0, 1] + WW[..., 1, 0], dy * (lift.Z[3][None, :] - lift.Z[3][:, None]))
    R = lift.rough_path(5, check=True)
    assert R.n == 2
    assert np.isfinite(lift.kappa())


def test_lift_cross_equals_split_integrals():
    Y = field(lambda t, x: np.exp(-t) * np.sin(x), M=240)
    lift = assemble_lift(Y, 1.0, check_regularity=False)
    k = 8
    I1 = cross_integral_homogeneous(GridPath(Y.x0, Y.dx, Y.values[k]), Y.t[k], 1.0)
    I2 = cross_integral_inhomogeneous(Y, Y.t[k], 1.0, check=False)
    assert np.allclose(lift.cross(k), I1.values + I2.values, atol=1e-12)
    assert np.allclose(lift.cell_cross(k), np.diag(lift.cross(k), 1))


def test_save_writes_manifest(tmp_path):
    Y = field(lambda t, x: np.sin(x) + t, M=12, nt=2)
    lift = assemble_lift(Y, 1.0, check_regularity=False)
    d = lift.save(tmp_path / "lift")
    man = json.loads((d / "manifest.json").read_text())
    assert man["n_slices"] == 3 and len(man["files"]) == 12
    assert (d / "W_t000.csv").exists()


def test_joint_exponents_and_warning():
    ex = fitted_joint_exponents(field(lambda t, x: np.exp(-t) * np.sin(x)))
    assert ex["young"] and ex["nu"] == pytest.approx(1.0, abs=0.05)
    rng = np.random.default_rng(3)
    rough_time = TimeSpaceField(0.0, 1 / 64, -1.0, 2 / 64, rng.standard_normal((65, 65)))
    with pytest.warns(JointRegularityWarning):
        lift = assemble_lift(rough_time, 1.0, validate=False)
    assert lift.diagnostics["status"] == "diagnostic"


def test_cauchy_study_on_fbm_environment():
    env = Environment.from_profile(fbm_path(4.0, 256, 0.45, 0), 1.0)
    Y = env.window(0.0, 1.0, 8)
    rep = geometric_cauchy_study(Y, 1.0, (8, 16, 32), 0.4, window=(-1, 1))
    assert rep.decreasing and rep.kappa_ratio < 3
    with pytest.raises(DomainError):
        geometric_cauchy_study(Y, 1.0, (8, 16))
