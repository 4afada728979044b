import numpy as np
import pytest
from scipy.stats import ks_2samp

from roughdrift.environment import Environment
from roughdrift.errors import DomainError
from roughdrift.fbm import fbm_path
from roughdrift.holder import GridPath
from roughdrift.lift import assemble_lift
from roughdrift.pde import MildProblem, solve_mild
from roughdrift.sde import (DriftQuery, block_streams, bootstrap_band, brownian_part_check, drift_expansion,
                            drift_function, drift_profile, drift_remainder_study, exponential_moment_check,
                            ks_distance, level_seed, martingale_defect, simulate_euler, telescoping_check,
                            two_scheme_law_comparison)


def ou_env(a=8.0, M=640):
    return Environment.from_profile(GridPath.from_function(lambda x: -0.5 * x**2, -a, a, M), 1.0)


def test_linear_potential_gives_shifted_brownian_motion():
    env = Environment.from_function(lambda t, x: 0.7 * x + 0 * t, 1.0, 8, -6, 6, 120)
    p = simulate_euler(env, 0.2, 2.0**-8, 300, 3)
    assert np.abs(p.X - (0.2 + p.B + 0.7 * p.times[None, :])).max() < 1e-12


def test_results_independent_of_worker_count():
    env = ou_env()
    a = simulate_euler(env, 0.0, 2.0**-6, 3000, 11, workers=1)
    b = simulate_euler(env, 0.0, 2.0**-6, 3000, 11, workers=3)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.B, b.B)
    c = simulate_euler(env, 0.0, 2.0**-6, 3000, 12)
    assert not np.array_equal(a.X, c.X)


def test_block_streams_prefix_stable():
    g1, s1 = block_streams(5, 2500)
    g2, s2 = block_streams(5, 1500)
    assert s1[:1] == s2[:1] == [1024]
    assert np.array_equal(g1[0].standard_normal(4), g2[0].standard_normal(4))
    with pytest.raises(DomainError):
        block_streams(-1, 10)


def test_ornstein_uhlenbeck_moments():
    p = simulate_euler(ou_env(), 1.0, 2.0**-8, 10000, 0)
    end = p.X[:, -1]
    se = end.std() / np.sqrt(end.size)
    dt = 2.0**-8
    # Euler recursion: mean (1 - dt)^n, variance dt sum (1 - dt)^(2k)
    n = 256
    assert abs(end.mean() - (1 - dt) ** n) < 3 * se
    var = dt * (1 - (1 - dt) ** (2 * n)) / (1 - (1 - dt) ** 2)
    assert end.var() == pytest.approx(var, rel=0.05)


def test_paths_leaving_window_are_frozen():
    env = Environment.from_function(lambda t, x: 50 * x + 0 * t, 1.0, 4, -1, 1, 40)
    p = simulate_euler(env, 0.0, 2.0**-6, 200, 0)
    assert p.frozen_fraction > 0.9
    assert np.all(np.abs(p.X) <= 1.0 + 1e-12)


def test_simulation_validation():
    env = Environment.from_function(lambda t, x: x + 0 * t, 1.0, 4, -1, 1, 40)
    with pytest.raises(DomainError):
        simulate_euler(env, 0.0, 0.3, 10, 0)
    with pytest.raises(DomainError):
        simulate_euler(env, 0.0, 2.0**-4, 10, 0, T=2.0)
    with pytest.raises(DomainError):
        simulate_euler(env, 0.0, 2.0**-4, 10, 0, record_every=3)
    p = simulate_euler(env, 0.0, 2.0**-4, 10, 0, record_every=4)
    with pytest.raises(DomainError):
        p.index(0.1)


def test_martingale_defect_smooth_environment():
    env = Environment.from_function(lambda t, x: np.exp(-t) * np.sin(x), 1.0, 32, -8, 8, 320)
    lift = assemble_lift(env.Y, 1.0, check_regularity=False)
    sol = solve_mild(MildProblem.from_functions(lift, lambda x: x, lambda x: np.ones_like(x)))
    p = simulate_euler(env, 0.3, 2.0**-10, 4000, 1, record_every=32)
    rep = martingale_defect(sol, None, p, [0.25, 0.5, 1.0])
    assert rep.passed
    assert rep.target == pytest.approx(np.interp(0.3, lift.x, sol.u.values[0]))


def test_martingale_defect_with_source():
    env = Environment.zero(1.0, 6.0, 120)
    lift = assemble_lift(env.window(0.0, 1.0, 16), 1.0, check_regularity=False)
    f = lambda t, x: 1.0 + 0 * x
    p_ = MildProblem.from_functions(lift, lambda x: x**2, lambda x: 2 * x, f=f)
    sol = solve_mild(p_)
    paths = simulate_euler(env, 0.0, 2.0**-8, 4000, 2, record_every=16)
    rep = martingale_defect(sol, p_.f, paths, [0.5, 1.0])
    assert rep.passed


def test_drift_of_linear_potential():
    env = Environment.from_profile(GridPath.from_function(lambda x: 0.7 * x, -4, 4, 320), 1.0)
    for h in (0.05, 0.25):
        assert drift_function(env, DriftQuery(0.0, 0.3, h)) == pytest.approx(0.7 * h, abs=1e-8)
        assert drift_expansion(env, DriftQuery(0.0, 0.3, h)) == pytest.approx(0.7 * h, abs=1e-8)


def test_drift_matches_ornstein_uhlenbeck_mean():
    env = ou_env()
    for x, h in ((0.5, 0.25), (-1.0, 0.1)):
        assert drift_function(env, DriftQuery(0.0, x, h)) == pytest.approx(x * (np.exp(-h) - 1), abs=1e-5)


def test_drift_profile_vectorised():
    env = ou_env()
    xs = np.array([-0.5, 0.0, 0.5])
    prof = drift_profile(env, 0.0, 0.1, xs)
    assert np.allclose(prof(xs), xs * (np.exp(-0.1) - 1), atol=2e-4)


def test_remainder_beats_linear_order_on_rough_environment():
    env = Environment.from_profile(fbm_path(4.0, 2048, 0.45, 2), 1.0)
    rep = drift_remainder_study(env, 0.0, 0.0, [2.0**-k for k in (5, 6, 7, 8)], window=(-1, 1))
    assert rep.slope > 1.0 and rep.passed


def test_brownian_part_smooth_drift_scales_linearly():
    p = simulate_euler(ou_env(), 0.5, 2.0**-10, 2000, 4, record_every=4)
    rep = brownian_part_check(p, [2.0**-k for k in (3, 4, 5, 6)])
    assert rep.slopes[2] == pytest.approx(1.0, abs=0.1)
    with pytest.raises(DomainError):
        brownian_part_check(p, [2.0**-12])


def test_ks_distance_against_scipy(rng):
    a, b = rng.standard_normal(500), rng.standard_normal(700) + 0.1
    assert ks_distance(a, b) == pytest.approx(ks_2samp(a, b).statistic, abs=1e-12)
    assert ks_distance(a, a) == 0.0


def test_bootstrap_band_covers_same_law(rng):
    a, b = rng.standard_normal(2000), rng.standard_normal(2000)
    band = bootstrap_band(a, b, 200, seed=1)
    # asymptotic 95% quantile of the two-sample statistic: 1.358 sqrt(2/n)
    assert band == pytest.approx(1.358 * np.sqrt(2 / 2000), rel=0.2)


def test_level_seed_distinct():
    assert level_seed(0, 16) != level_seed(0, 32)
    assert level_seed(3, 16) == level_seed(3, 16)


def test_two_level_law_and_moments_on_smooth_limit():
    env = Environment.from_profile(GridPath.from_function(np.sin, -8, 8, 1024), 1.0)
    law = two_scheme_law_comparison(env, (16, 32), 0.0, 1.0, 2.0**-6, 4000, 0)
    assert law.passed
    mom = exponential_moment_check(env, (16, 32), 0.0, 2.0**-6, 4000, 0)
    assert mom.passed


def test_telescoping_sum_centred():
    env = ou_env(a=6.0, M=240)
    p = simulate_euler(env, 0.5, 2.0**-8, 2000, 9, record_every=8)
    rep = telescoping_check(env, p, 4)
    assert rep.passed
