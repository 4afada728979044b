import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from roughdrift.errors import DomainError
from roughdrift.holder import (GridPath, HolderParams, TimeSpaceField, TwoParamField, holder_exponent_fit,
                               holder_seminorm, kappa_growth, time_space_holder, two_param_norm, weighted_norm)

finite = st.floats(-10, 10, allow_nan=False)


def brute_seminorm(vals, dx, alpha):
    n = len(vals)
    return max(abs(vals[j] - vals[i]) / ((j - i) * dx) ** alpha for i in range(n) for j in range(i + 1, n))


def test_constant_path_has_zero_seminorm():
    f = GridPath(0.0, 0.1, np.full(11, 3.0))
    assert holder_seminorm(f, 0.3) == 0.0


def test_linear_path_lipschitz_constant():
    f = GridPath.from_function(lambda x: 2.5 * x - 1, -1, 1, 40)
    assert holder_seminorm(f, 1.0) == pytest.approx(2.5)


def test_sqrt_modulus_is_half_holder():
    f = GridPath.from_function(lambda x: np.sqrt(np.abs(x)), -1, 1, 200)
    assert holder_seminorm(f, 0.5) == pytest.approx(1.0, rel=1e-9)


@given(arrays(float, st.integers(2, 25), elements=finite), st.floats(0.1, 1.0))
def test_seminorm_matches_brute_force(vals, alpha):
    f = GridPath(0.0, 0.07, vals)
    assert holder_seminorm(f, alpha) == pytest.approx(brute_seminorm(vals, 0.07, alpha), rel=1e-12, abs=1e-12)


@given(arrays(float, st.integers(2, 20), elements=finite), st.floats(-5, 5), st.floats(0.2, 1.0))
def test_seminorm_homogeneous_and_shift_invariant(vals, c, alpha):
    f = GridPath(0.0, 0.1, vals)
    g = GridPath(0.0, 0.1, c * vals + 7.0)
    assert holder_seminorm(g, alpha) == pytest.approx(abs(c) * holder_seminorm(f, alpha), rel=1e-9, abs=1e-9)


def test_vector_seminorm_uses_euclidean_norm():
    x = np.linspace(0, 1, 11)
    f = GridPath(0.0, 0.1, np.column_stack([3 * x, 4 * x]))
    assert holder_seminorm(f, 1.0) == pytest.approx(5.0)


def test_sub_interval_and_errors():
    f = GridPath.from_function(lambda x: x**2, -2, 2, 40)
    assert holder_seminorm(f, 1.0, sub=(0, 1)) == pytest.approx(1.9, rel=1e-9)
    with pytest.raises(DomainError):
        holder_seminorm(f, 1.0, sub=(0.01, 0.02))
    with pytest.raises(DomainError):
        f.restrict((-3, 0))


def test_weighted_norm_damps_seminorm():
    f = GridPath.from_function(lambda x: x, -4, 4, 80)
    assert weighted_norm(f, 1.0) == pytest.approx(4 + 4 ** -0.5)


def test_two_param_norm_of_squared_increment():
    R = TwoParamField.from_function(lambda x, y: (y - x) ** 2, 0, 1, 20)
    assert two_param_norm(R, 2.0) == pytest.approx(1.0)
    assert two_param_norm(R, 1.0) == pytest.approx(1.0)


def test_two_param_field_rejects_nonzero_diagonal():
    with pytest.raises(DomainError):
        TwoParamField(0.0, 0.1, np.ones((3, 3)))


def test_kappa_growth_linear_path():
    W = GridPath.from_function(lambda x: x, -2, 2, 40)
    WW = TwoParamField.from_function(lambda x, y: 0.5 * (y - x) ** 2, -2, 2, 40)
    # ||W||_1 = 1 and ||WW||_2 = 1/2 on every window; the sup sits at a = 1
    assert kappa_growth(W, WW, 1.0, 0.1) == pytest.approx(1.5)


def test_time_space_holder_additive_field():
    f = TimeSpaceField(0.0, 0.1, 0.0, 0.1, np.add.outer(np.arange(5) * 0.1, np.arange(6) * 0.1))
    # |dt + dx| / (|dt| + |dx|) <= 1 with equality on aligned increments
    assert time_space_holder(f, 1.0, 1.0) == pytest.approx(1.0)


def test_exponent_fit_on_power_law():
    f = GridPath.from_function(lambda x: np.abs(x) ** 0.7, -1, 1, 2048)
    assert holder_exponent_fit(f, mode="max") == pytest.approx(0.7, abs=0.02)


def test_exponent_fit_brownian_block_mode(rng):
    ests = []
    for _ in range(10):
        B = np.concatenate([[0], np.cumsum(rng.standard_normal(2**14))]) / 2**7
        ests.append(holder_exponent_fit(GridPath(0.0, 2.0**-14, B)))
    assert 0.47 < np.mean(ests) < 0.53
    assert all(0.43 < e < 0.57 for e in ests)


def test_exponent_fit_smooth_path_is_one():
    f = GridPath.from_function(np.sin, 0, 1, 1024)
    assert holder_exponent_fit(f, mode="max") == pytest.approx(1.0, abs=0.01)
    assert holder_exponent_fit(f) == pytest.approx(1.0, abs=0.05)


def test_exponent_fit_validation():
    f = GridPath.from_function(np.sin, 0, 1, 16)
    with pytest.raises(DomainError):
        holder_exponent_fit(f, (1, 2))
    with pytest.raises(DomainError):
        holder_exponent_fit(f, (1, 2, 32))
    with pytest.raises(DomainError):
        holder_exponent_fit(f, mode="median")


def test_params_validation():
    HolderParams()
    with pytest.raises(DomainError):
        HolderParams(alpha=0.3)
    with pytest.raises(DomainError):
        HolderParams(theta=0.5)
    with pytest.raises(DomainError):
        HolderParams(alpha=0.4, beta=0.45).check_controlled()
    assert HolderParams(beta=0.9, alpha=0.95).beta_prime == 0.5


def test_grid_path_csv_roundtrip(tmp_path):
    f = GridPath.from_function(lambda x: np.exp(x) / 3, -1, 1, 17)
    f.to_csv(tmp_path / "f.csv")
    g = GridPath.read_csv(tmp_path / "f.csv")
    assert np.array_equal(f.values, g.values)
    assert g.x0 == f.x0 and g.dx == pytest.approx(f.dx)


def test_field_csv_roundtrip(tmp_path):
    vals = np.random.default_rng(1).standard_normal((4, 6))
    F = TimeSpaceField(0.0, 0.25, -1.0, 0.4, vals)
    F.to_csv(tmp_path / "F.csv")
    G = TimeSpaceField.read_csv(tmp_path / "F.csv")
    assert np.array_equal(F.values, G.values)


def test_at_time_interpolates_linearly():
    F = TimeSpaceField(0.0, 0.5, 0.0, 1.0, np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]))
    assert np.allclose(F.at_time(0.25), [1.0, 2.0])
