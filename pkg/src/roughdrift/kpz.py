"""Backward stochastic-heat environment on a torus, its lift, and polymer-type SDE experiments."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environment import Environment
from .errors import DomainError
from .heat import heat_time_integral, mollify
from .holder import HolderParams, TimeSpaceField, holder_exponent_fit
from .lift import geometric_cauchy_study
from .sde import (DriftQuery, _local_lift, _slope, brownian_part_check, level_seed, simulate_euler,
                  two_scheme_law_comparison)


@dataclass(frozen=True)
class SheEnvironment:
    """Y^{T0}_t(x) = int_t^{T0} int p_{s-t}(x - y) dzeta(s, y) on [-L/2, L/2), truncated to K Fourier modes.

    ``Yb`` is an optional smooth additive part (a function of (t, x)).
    The spatial mean mode is left out (zero).
    """

    T0: float = 1.0
    n_modes: int = 64
    torus_size: float = 2.0
    seed: int = 0
    Yb: object = None

    def __post_init__(self):
        if not self.T0 > 0 or not self.torus_size > 0:
            raise DomainError("T0 and the torus size must be positive")
        if self.n_modes < 1:
            raise DomainError("need at least one mode")

    @property
    def rates(self) -> np.ndarray:
        k = np.arange(1, self.n_modes + 1)
        return 0.5 * (2 * np.pi * k / self.torus_size) ** 2

    def pointwise_variance(self, t) -> np.ndarray:
        """Closed form Var Y_t(x) = sum_k (2/L) (1 - exp(-2 lam_k (T0 - t))) / (2 lam_k)."""
        lam = self.rates
        tau = self.T0 - np.asarray(t, dtype=float)[..., None]
        return (2.0 / self.torus_size * (1 - np.exp(-2 * lam * tau)) / (2 * lam)).sum(axis=-1)


def she_coefficients(env: SheEnvironment, nt: int, rng: np.random.Generator | None = None,
                     innovations: bool = False):
    """Cosine and sine coefficients c_k(t_j) on t_j = j T0 / nt, shape (nt+1, 2K).

    Exact backward recursion from c(T0) = 0:
    c(t - d) = exp(-lam d) c(t) + sqrt((1 - exp(-2 lam d)) / (2 lam)) * xi.
    """
    rng = np.random.default_rng(env.seed) if rng is None else rng
    lam = np.tile(env.rates, 2)
    d = env.T0 / nt
    decay = np.exp(-lam * d)
    sd = np.sqrt((1 - np.exp(-2 * lam * d)) / (2 * lam))
    xi = rng.standard_normal((nt, lam.size))
    c = np.zeros((nt + 1, lam.size))
    for j in range(nt - 1, -1, -1):
        c[j] = decay * c[j + 1] + sd * xi[j]
    return (c, xi) if innovations else c


def torus_grid(env: SheEnvironment, Mx: int) -> np.ndarray:
    return -env.torus_size / 2 + env.torus_size * np.arange(Mx) / Mx


def _basis(env: SheEnvironment, x: np.ndarray) -> np.ndarray:
    k = np.arange(1, env.n_modes + 1)[:, None]
    arg = 2 * np.pi * k * x[None, :] / env.torus_size
    norm = np.sqrt(2.0 / env.torus_size)
    return norm * np.vstack([np.cos(arg), np.sin(arg)])


def sample_she(env: SheEnvironment, nt: int, Mx: int, rng: np.random.Generator | None = None,
               include_smooth: bool = True) -> TimeSpaceField:
    """Y = Y^{T0} (+ Yb) on the time grid j T0 / nt and the Mx-point periodic grid."""
    if env.n_modes > Mx // 2 - 1:
        raise DomainError("more modes than the space grid resolves")
    x = torus_grid(env, Mx)
    vals = she_coefficients(env, nt, rng) @ _basis(env, x)
    if include_smooth and env.Yb is not None:
        t = np.linspace(0.0, env.T0, nt + 1)
        tt, xx = np.meshgrid(t, x, indexing="ij")
        vals = vals + np.asarray(env.Yb(tt, xx), dtype=float) * np.ones_like(tt)
    return TimeSpaceField(0.0, env.T0 / nt, x[0], env.torus_size / Mx, vals)


def she_environment(env: SheEnvironment, nt: int, Mx: int, include_smooth: bool = True) -> Environment:
    Y = sample_she(env, nt, Mx, include_smooth=include_smooth)
    return Environment(Y, "periodic", meta={"she": True, "n_modes": env.n_modes, "seed": env.seed})


def she_mollified(Y: TimeSpaceField, n: int) -> TimeSpaceField:
    """Periodic convolution of every slice with n rho(n .)."""
    return mollify(Y, n, "periodic")


@dataclass
class VarianceReport:
    times: list
    estimates: list
    se: list
    exact: list
    passed: bool


def she_variance_check(env: SheEnvironment, nt: int = 8, Mx: int = 256, reps: int = 200, seed: int = 0) -> VarianceReport:
    """Pointwise variance over replicates (pooled over x) against the closed-form mode sum.

    The SE of the pooled estimate comes from the spread of per-replicate spatial means of Y^2.
    """
    rng = np.random.default_rng(seed)
    sq = np.stack([sample_she(env, nt, Mx, rng, include_smooth=False).values ** 2 for _ in range(reps)])
    per_rep = sq.mean(axis=2)
    t = np.linspace(0.0, env.T0, nt + 1)
    est = per_rep.mean(axis=0)
    se = per_rep.std(axis=0, ddof=1) / np.sqrt(reps)
    exact = env.pointwise_variance(t)
    ok = bool(np.all(np.abs(est - exact) <= 3 * se + 1e-14))
    return VarianceReport(t.tolist(), est.tolist(), se.tolist(), exact.tolist(), ok)


@dataclass
class HolderBandReport:
    exponents: list
    fraction: float
    band: tuple
    passed: bool


def she_holder_band(env: SheEnvironment, seeds, nt: int = 1, Mx: int = 4096, t: float = 0.0,
                    scales=(1, 2, 4, 8, 16, 32, 64, 128, 256), band=(0.4, 0.5), need: float = 0.9) -> HolderBandReport:
    """Spatial Hölder exponent of one slice over many seeds.

    The fit uses the largest increment per lag (the sup modulus), whose logarithmic excess is
    what keeps the exponent of a Brownian-like slice below 1/2.
    """
    ex = []
    for s in seeds:
        e = SheEnvironment(env.T0, env.n_modes, env.torus_size, int(s))
        Y = sample_she(e, nt, Mx, include_smooth=False)
        row = Y.values[int(round(t / Y.dt))]
        closed = np.append(row, row[0])
        ex.append(holder_exponent_fit(TimeSpaceField(0.0, 1.0, Y.x0, Y.dx, closed[None, :]), scales, mode="max"))
    frac = float(np.mean([(band[0] <= e <= band[1]) for e in ex]))
    return HolderBandReport(ex, frac, tuple(band), bool(frac >= need))


@dataclass
class SheCauchyReport:
    T_list: list
    levels: list
    per_T: dict
    kappa_per_T: list
    kappa_ratio: float
    decreasing: bool
    passed: bool


def she_lift_cauchy(Y: TimeSpaceField, T_list, levels=(8, 16, 32), alpha_prime: float = 0.4,
                    chi: float = 0.1, params: HolderParams | None = None, kappa_ratio_max: float = 3.0) -> SheCauchyReport:
    """Geometric Cauchy study of the torus lift for every horizon in ``T_list``."""
    if len(levels) < 3:
        raise DomainError("need at least three mollifier levels")
    params = params or HolderParams()
    per_T, kap = {}, []
    dec = True
    for T in T_list:
        rep = geometric_cauchy_study(Y, T, levels, alpha_prime, chi, params, "periodic", None, np.inf)
        per_T[float(T)] = {"dY": rep.dY, "dZ": rep.dZ, "dWW": rep.dWW, "kappa": rep.kappa,
                           "decreasing": rep.decreasing}
        dec &= rep.decreasing
        kap.append(max(rep.kappa))
    kmin = min(kap)
    ratio = max(kap) / kmin if kmin > 0 else (1.0 if max(kap) == 0 else float("inf"))
    return SheCauchyReport([float(T) for T in T_list], list(levels), per_T, kap, ratio, dec,
                           bool(dec and ratio <= kappa_ratio_max))


@dataclass
class PolymerReport:
    level: int
    slope: float
    slopes: dict
    h: list
    moments: list
    endpoint: dict
    ks: float | None
    band: float | None
    frozen: float
    passed: bool
    extra: dict = field(default_factory=dict)


def polymer_experiment(env: Environment, level: int, x0: float = 0.0, n_paths: int = 10_000, seed: int = 0,
                       dt: float = 2.0**-14, T: float | None = None, hs=None, compare_levels=(16, 32),
                       slope_band=(0.65, 0.85), beta: float = 0.43) -> PolymerReport:
    """dX = dB + d_x Y^n_t(X) dt on the torus: drift scaling, endpoint law and a two-level KS test."""
    T = env.T0 if T is None else T
    hs = hs or [T * 2.0**-k for k in range(4, 9)]
    rec = int(round(min(hs) / dt))
    p = simulate_euler(env.mollified(level), x0, dt, n_paths, level_seed(seed, level), T=T, record_every=rec)
    br = brownian_part_check(p, hs, beta)
    end = p.X[:, -1]
    summary = {"mean": float(end.mean()), "std": float(end.std(ddof=1)),
               "q05": float(np.quantile(end, 0.05)), "q50": float(np.quantile(end, 0.5)),
               "q95": float(np.quantile(end, 0.95))}
    ks = band = None
    law_ok = True
    if compare_levels:
        law = two_scheme_law_comparison(env, compare_levels, x0, T, dt * 4, n_paths, seed)
        ks, band, law_ok = law.ks, law.band, law.passed
    slope = br.slopes[2]
    ok = slope_band[0] <= slope <= slope_band[1] and law_ok
    return PolymerReport(level, slope, br.slopes, br.h, br.moments[2], summary, ks, band, p.frozen_fraction, bool(ok))


@dataclass
class SimplificationReport:
    h: list
    difference: list
    mean_abs: list
    slope: float
    mean_ratio: float
    passed: bool


def _second_term(Y: TimeSpaceField, t: float, h: float, steps: int, extend: str) -> np.ndarray:
    env = Environment(Y, extend)
    lift = _local_lift(env, t, h, 0.0, steps)
    return heat_time_integral(lift.J, lift.dt, lift.dx, k=1, extend=extend)[0]


def drift_expansion_simplification_check(she: SheEnvironment, q: DriftQuery, level: int, nt: int = 256,
                                         Mx: int = 256, hs=None, steps: int = 16) -> SimplificationReport:
    """Second term of the drift expansion with (Y, Z) against (Y^{T0}, Z^{T0}) along an h ladder.

    ``difference`` is the value at q.x; the slope and the halving ratios use the mean absolute
    difference over the torus, which is far less noisy than one point.
    """
    hs = hs or [q.h * 2.0**-k for k in range(4)]
    Yfull = she_mollified(sample_she(she, nt, Mx), level)
    Yrough = she_mollified(sample_she(she, nt, Mx, include_smooth=False), level)
    diffs, mags = [], []
    for h in hs:
        d = _second_term(Yfull, q.t, h, steps, "periodic") - _second_term(Yrough, q.t, h, steps, "periodic")
        diffs.append(float(np.interp(q.x, Yfull.x, d, period=she.torus_size)))
        mags.append(float(np.abs(d).mean()))
    if max(mags) <= 1e-14:
        return SimplificationReport(list(hs), diffs, mags, float("inf"), float("inf"), True)
    s = _slope(hs, mags)
    ratios = [a / b for a, b in zip(mags, mags[1:]) if b > 0]
    mr = float(np.mean(ratios)) if ratios else float("inf")
    return SimplificationReport(list(hs), diffs, mags, s, mr, bool(s > 1.2 and mr >= 2.2))


def save_snapshot(Y: TimeSpaceField, she: SheEnvironment, directory) -> Path:
    """CSV dump of the field with a JSON manifest of the sampling parameters."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    Y.to_csv(d / "Y.csv")
    manifest = {"T0": she.T0, "n_modes": she.n_modes, "torus_size": she.torus_size, "seed": she.seed,
                "nt": Y.N, "Mx": Y.M + 1, "smooth_part": she.Yb is not None}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return d
