import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from roughdrift.errors import DomainError, IntegrityError
from roughdrift.holder import GridPath, TwoParamField
from roughdrift.rough import (ControlledPath, RoughPath, chen_defect, compensated_sum, cumulative_compensated,
                              integral_error_bound_check, make_iterated_integral, max_chen_defect,
                              remainder_field, rough_integral, young_integral)


def brownian(rng, M, dim=None, a=1.0):
    shape = (M,) if dim is None else (M, dim)
    inc = rng.standard_normal(shape) * np.sqrt(2 * a / M)
    return GridPath(-a, 2 * a / M, np.concatenate([np.zeros((1,) + shape[1:]), np.cumsum(inc, axis=0)]))


paths2d = arrays(float, st.tuples(st.integers(3, 12), st.just(2)), elements=st.floats(-5, 5))


@given(paths2d)
def test_iterated_integral_satisfies_chen(vals):
    W = GridPath(0.0, 0.1, vals)
    R = RoughPath(W, make_iterated_integral(W), check=False)
    assert max_chen_defect(R, full=True) < 1e-10 * max(1.0, np.abs(vals).max() ** 2)


@given(paths2d)
def test_symmetric_part_is_half_square(vals):
    W = GridPath(0.0, 0.1, vals)
    WW = make_iterated_integral(W).values
    dW = vals[None, :, :] - vals[:, None, :]
    sym = WW + np.swapaxes(WW, 2, 3)
    assert np.allclose(sym, np.einsum("ija,ijb->ijab", dW, dW), atol=1e-10)


def test_scalar_iterated_integral(rng):
    W = brownian(rng, 64)
    WW = make_iterated_integral(W).values
    dW = W.values[None, :] - W.values[:, None]
    assert np.allclose(WW, 0.5 * dW**2)


def test_chen_defect_single_triple(rng):
    W = brownian(rng, 32, 2)
    R = RoughPath(W, make_iterated_integral(W))
    assert np.abs(chen_defect(R, W.x[3], W.x[10], W.x[30])).max() < 1e-12
    with pytest.raises(DomainError):
        chen_defect(R, W.x[5], W.x[3], W.x[6])


def test_rough_path_rejects_broken_chen(rng):
    W = brownian(rng, 16, 2)
    WW = make_iterated_integral(W).values.copy()
    WW[2, 9] += 1.0
    with pytest.raises(IntegrityError):
        RoughPath(W, TwoParamField(W.x0, W.dx, WW))
    with pytest.raises(DomainError):
        RoughPath(W, make_iterated_integral(W), alpha=0.3)


def test_telescoping_integral_every_partition(rng):
    W = brownian(rng, 64, 2)
    R = RoughPath(W, make_iterated_integral(W))
    v = ControlledPath(GridPath(W.x0, W.dx, W.values[:, 0] - W.values[0, 0]),
                       GridPath(W.x0, W.dx, np.tile([1.0, 0.0], (65, 1))))
    target = R.WWc[0, -1][0]
    for _ in range(50):
        inner = np.sort(rng.choice(np.arange(1, 64), rng.integers(0, 20), replace=False))
        rep = rough_integral(v, R, W.x[0], W.x[-1], partition=W.x[inner])
        assert np.abs(rep.partition_value - target).max() < 1e-12
    assert np.abs(rep.value - target).max() < 1e-12


def test_compensated_sum_converges_for_function_of_path(rng):
    # v = cos(W1) with derivative (-sin W1, 0): the integral against W1 is sin W1(y) - sin W1(x)
    W = brownian(rng, 1024, 2)
    R = RoughPath(W, make_iterated_integral(W), check=False)
    w1 = W.values[:, 0]
    v = ControlledPath(GridPath(W.x0, W.dx, np.cos(w1)),
                       GridPath(W.x0, W.dx, np.column_stack([-np.sin(w1), np.zeros_like(w1)])))
    rep = rough_integral(v, R, W.x[0], W.x[-1], levels=6)
    exact = np.sin(w1[-1]) - np.sin(w1[0])
    assert abs(rep.value[0] - exact) < 1e-3
    # local error of order h^(3 alpha) per cell, so the global rate is about 3/2 - 1 for Brownian W
    assert rep.slope > 0.4


def test_cumulative_matches_compensated_sum(rng):
    W = brownian(rng, 40, 2)
    R = RoughPath(W, make_iterated_integral(W))
    v = ControlledPath(GridPath(W.x0, W.dx, np.sin(W.x)), GridPath(W.x0, W.dx, rng.standard_normal((41, 2))))
    C = cumulative_compensated(v, R)
    assert np.allclose(C[-1] - C[7], compensated_sum(v, R, np.arange(7, 41)))


def test_remainder_vanishes_for_linear_controlled(rng):
    W = brownian(rng, 30, 2)
    R = RoughPath(W, make_iterated_integral(W))
    c = np.array([0.3, -1.2])
    v = ControlledPath(GridPath(W.x0, W.dx, W.values @ c), GridPath(W.x0, W.dx, np.tile(c, (31, 1))))
    assert np.abs(remainder_field(v, R).values).max() < 1e-12


def test_rough_integral_bad_partition(rng):
    W = brownian(rng, 16, 2)
    R = RoughPath(W, make_iterated_integral(W))
    v = ControlledPath(GridPath(W.x0, W.dx, np.zeros(17)), GridPath(W.x0, W.dx, np.zeros((17, 2))))
    with pytest.raises(DomainError):
        rough_integral(v, R, W.x[3], W.x[8], partition=[W.x[10]])
    with pytest.raises(DomainError):
        rough_integral(v, R, W.x[8], W.x[3])


def test_error_bound_ratio_stable(rng):
    W = brownian(rng, 256, 2)
    R = RoughPath(W, make_iterated_integral(W), alpha=0.45, check=False)
    w1 = W.values[:, 0]
    v = ControlledPath(GridPath(W.x0, W.dx, np.cos(w1)),
                       GridPath(W.x0, W.dx, np.column_stack([-np.sin(w1), np.zeros_like(w1)])), beta=0.4)
    assert integral_error_bound_check(v, R, W.x[0], W.x[-1]).passed


@given(arrays(float, st.integers(2, 30), elements=st.floats(-3, 3)))
def test_young_self_integral_exact(vals):
    g = GridPath(0.0, 0.1, vals)
    rep = young_integral(g, g, with_constant=False)
    assert rep.value == pytest.approx(0.5 * (vals[-1] ** 2 - vals[0] ** 2), abs=1e-10)


def test_young_smooth_pair():
    f = GridPath.from_function(np.cos, 0, 1, 2000)
    g = GridPath.from_function(lambda x: x**2, 0, 1, 2000)
    # int_0^1 cos(x) 2x dx = 2 (cos 1 + sin 1 - 1)
    assert young_integral(f, g).value == pytest.approx(2 * (np.cos(1) + np.sin(1) - 1), abs=1e-6)


def test_young_rejects_mismatched_grids():
    with pytest.raises(DomainError):
        young_integral(GridPath(0, 0.1, np.zeros(5)), GridPath(0, 0.2, np.zeros(5)))
