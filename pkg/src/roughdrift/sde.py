"""Monte Carlo for dX = d_x Y_t(X) dt + dB and the drift function h -> u^{t+h}_t(x) - x."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment
from .errors import DomainError
from .heat import heat_time_integral
from .holder import GridPath, HolderParams, TimeSpaceField
from .lift import assemble_lift
from .pde import MildProblem, MildSolution, solve_mild

BLOCK = 1024


@dataclass
class SdePaths:
    """Paths recorded every ``record_every`` Euler steps of size ``step``.

    X and B have shape (paths, recorded times); ``dt`` is the recording interval.
    """

    t0: float
    dt: float
    x0: float
    X: np.ndarray
    B: np.ndarray
    seed: int
    step: float
    frozen: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.frozen is None:
            self.frozen = np.zeros(self.X.shape[0], dtype=bool)

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.X.shape[1])

    @property
    def T(self) -> float:
        return self.t0 + self.dt * (self.X.shape[1] - 1)

    @property
    def frozen_fraction(self) -> float:
        return float(self.frozen.mean())

    def index(self, t: float) -> int:
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k >= self.X.shape[1] or abs(self.t0 + k * self.dt - t) > 1e-9:
            raise DomainError(f"time {t} is not a recorded time")
        return k


@dataclass(frozen=True)
class DriftQuery:
    t: float
    x: float
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError("h must be positive")


def _as_env(Y) -> Environment:
    if isinstance(Y, Environment):
        return Y
    if isinstance(Y, TimeSpaceField):
        return Environment(Y)
    raise DomainError("expected an Environment or a TimeSpaceField")


def block_streams(seed: int, n_paths: int):
    """One independent generator per block of BLOCK paths, keyed by (seed, block index)."""
    if seed < 0:
        raise DomainError("seed must be non-negative")
    nb = -(-n_paths // BLOCK)
    children = np.random.SeedSequence(seed).spawn(nb)
    sizes = [min(BLOCK, n_paths - b * BLOCK) for b in range(nb)]
    return [np.random.Generator(np.random.PCG64(c)) for c in children], sizes


def _threads(workers):
    if workers is None:
        workers = int(os.environ.get("ROUGHDRIFT_THREADS", "1") or 1)
    return max(1, int(workers))


def simulate_euler(Y, x0: float, dt: float, n_paths: int, seed: int, T: float | None = None,
                   t0: float | None = None, record_every: int = 1, workers: int | None = None) -> SdePaths:
    """Euler–Maruyama X_{k+1} = X_k + d_x Y_{t_k}(X_k) dt + dB_k.

    Paths that leave a non-periodic space window are frozen where they left and flagged.
    Results depend only on ``seed`` (blocks of paths own their random streams), not on ``workers``.
    """
    env = _as_env(Y)
    t0 = env.Y.t0 if t0 is None else float(t0)
    T = env.T0 if T is None else float(T)
    n_steps = int(round((T - t0) / dt))
    if n_steps < 1 or abs(t0 + n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise DomainError("dt must divide the simulation horizon")
    if not env.homogeneous and env.Y.N > 0:
        ratio = env.Y.dt / dt
        if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
            raise DomainError("dt must divide the environment time step")
        if T > env.T0 + 1e-12:
            raise DomainError("horizon beyond the environment")
    if n_steps % record_every:
        raise DomainError("record_every must divide the number of steps")
    gens, sizes = block_streams(seed, n_paths)
    sq = np.sqrt(dt)
    n_rec = n_steps // record_every

    def run(b):
        rng, m = gens[b], sizes[b]
        X = np.full(m, float(x0))
        B = np.zeros(m)
        alive = env.inside(X)
        Xr = np.empty((m, n_rec + 1))
        Br = np.empty((m, n_rec + 1))
        Xr[:, 0], Br[:, 0] = X, B
        for k in range(n_steps):
            dB = sq * rng.standard_normal(m)
            step = env.drift_at(t0 + k * dt, X) * dt + dB
            Xn = X + step
            ok = env.inside(Xn)
            alive &= ok
            X = np.where(alive, Xn, X)
            B = B + dB
            if (k + 1) % record_every == 0:
                j = (k + 1) // record_every
                Xr[:, j], Br[:, j] = X, B
        return Xr, Br, ~alive

    nw = _threads(workers)
    if nw > 1 and len(gens) > 1:
        with ThreadPoolExecutor(nw) as ex:
            parts = list(ex.map(run, range(len(gens))))
    else:
        parts = [run(b) for b in range(len(gens))]
    X = np.concatenate([p[0] for p in parts])
    B = np.concatenate([p[1] for p in parts])
    frozen = np.concatenate([p[2] for p in parts])
    return SdePaths(t0, dt * record_every, float(x0), X, B, int(seed), dt, frozen)


def _mc(samples: np.ndarray):
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0


def _within(est: float, se: float, target: float, k: float = 3.0) -> bool:
    tol = k * se if se > 0 else 1e-10 * max(1.0, abs(target))
    return abs(est - target) <= tol + 1e-12 * max(1.0, abs(target))


@dataclass
class MartingaleReport:
    checkpoints: list
    estimates: list
    se: list
    target: float
    passed: bool


def martingale_defect(sol: MildSolution, f: TimeSpaceField | None, paths: SdePaths, checkpoints) -> MartingaleReport:
    """E[u_t(X_t) - int_0^t f_r(X_r) dr] at each checkpoint against u_{t0}(x0)."""
    u = sol.u
    target = float(np.interp(paths.x0, u.x, u.at_time(paths.t0)))
    times = paths.times
    fvals = None
    if f is not None:
        fvals = np.stack([np.interp(paths.X[:, j], f.x, f.at_time(s)) for j, s in enumerate(times)], axis=1)
    est, ses = [], []
    for t in checkpoints:
        k = paths.index(t)
        val = np.interp(paths.X[:, k], u.x, u.at_time(t))
        if fvals is not None and k > 0:
            val = val - np.trapezoid(fvals[:, : k + 1], dx=paths.dt, axis=1)
        m, s = _mc(val)
        est.append(m)
        ses.append(s)
    passed = all(_within(m, s, target) for m, s in zip(est, ses))
    return MartingaleReport(list(checkpoints), est, ses, target, bool(passed))


def _local_sub(env: Environment, x, h: float, margin: float = 12.0):
    if env.extend == "periodic":
        return None
    lo, hi = np.min(x), np.max(x)
    r = margin * np.sqrt(h) + 8 * env.Y.dx
    a = max(lo - r, env.Y.x0)
    b = min(hi + r, env.Y.x0 + env.Y.M * env.Y.dx)
    return (a, b)


def _local_lift(env: Environment, t: float, h: float, x, steps: int | None, sub=None):
    steps = steps or 16
    if not env.homogeneous:
        steps = max(steps, int(round(h / env.Y.dt)))
    sub = _local_sub(env, x, h) if sub is None else sub
    Yw = env.window(t, t + h, steps, sub)
    return assemble_lift(Yw, t + h, HolderParams(), env.extend, validate=False, check_regularity=False)


def drift_solution(env: Environment, t: float, h: float, x=0.0, steps: int | None = None, sub=None,
                   tol: float = 1e-9, max_iter: int = 400) -> tuple:
    """Solve the terminal problem u_{t+h}(y) = y on [t, t+h]; returns (solution, lift)."""
    env = _as_env(env)
    lift = _local_lift(env, t, h, x, steps, sub)
    p = MildProblem.from_functions(lift, lambda y: y, lambda y: np.ones_like(y), tol=tol,
                                   max_iter=max_iter)
    return solve_mild(p), lift


def drift_profile(env, t: float, h: float, x=0.0, steps: int | None = None, sub=None) -> GridPath:
    """y -> u^{t+h}_t(y) - y on the local grid used for the solve."""
    sol, lift = drift_solution(env, t, h, x, steps, sub)
    return GridPath(lift.x0, lift.dx, sol.u.values[0] - lift.x)


def drift_function(env, q: DriftQuery, steps: int | None = None) -> float:
    """The drift b(t, x, h) = u^{t+h}_t(x) - x from the PDE with identity terminal condition."""
    return float(drift_profile(env, q.t, q.h, q.x, steps)(q.x))


def expansion_profile(env, t: float, h: float, x=0.0, steps: int | None = None, sub=None) -> GridPath:
    """int_t^{t+h} int d_x p_{s-t}(. - y) [ (Y_s(y) - Y_s(.)) + int_.^y Z_s dY_s ] dy ds on the local grid.

    Both brackets enter through the primitive Y + J: d_x p integrates constants to zero, and
    J(y) - J(x) is the rough integral of Z against dY.
    """
    env = _as_env(env)
    lift = _local_lift(env, t, h, x, steps, sub)
    H = lift.Y + lift.J
    vals = heat_time_integral(H, lift.dt, lift.dx, k=1, extend=lift.extend)[0]
    return GridPath(lift.x0, lift.dx, vals)


def drift_expansion(env, q: DriftQuery, steps: int | None = None) -> float:
    return float(expansion_profile(env, q.t, q.h, q.x, steps)(q.x))


def _slope(h, y) -> float:
    h, y = np.asarray(h, float), np.asarray(y, float)
    good = y > 0
    if good.sum() < 2:
        return float("inf")
    return float(np.polyfit(np.log(h[good]), np.log(y[good]), 1)[0])


@dataclass
class RemainderReport:
    h: list
    drift: list
    expansion: list
    remainder: list
    slope: float
    passed: bool


def drift_remainder_study(env, t: float, x: float, hs, steps: int = 16, window=None) -> RemainderReport:
    """|drift - expansion| along a ladder of h; the fitted power must exceed 1.

    With ``window=(a, b)`` the absolute values are averaged over the grid points of [a, b]
    (one solve gives the whole profile), which removes most of the dependence on one location.
    """
    hs = [float(h) for h in hs]
    d, e, r = [], [], []
    for h in hs:
        if window is None:
            d.append(drift_function(env, DriftQuery(t, x, h), steps))
            e.append(drift_expansion(env, DriftQuery(t, x, h), steps))
            r.append(abs(d[-1] - e[-1]))
        else:
            dp = drift_profile(env, t, h, window, steps)
            ep = expansion_profile(env, t, h, window, steps)
            keep = (dp.x >= window[0] - 1e-12) & (dp.x <= window[1] + 1e-12)
            d.append(float(np.abs(dp.values[keep]).mean()))
            e.append(float(np.abs(ep.values[keep]).mean()))
            r.append(float(np.abs(dp.values[keep] - ep.values[keep]).mean()))
    s = _slope(hs, r) if max(r) > 1e-14 else float("inf")
    return RemainderReport(hs, d, e, r, s, bool(s > 1.0))


@dataclass
class BrownianReport:
    h: list
    moments: dict
    se: dict
    slopes: dict
    threshold: float
    passed: bool


def brownian_part_check(paths: SdePaths, hs, beta: float = 0.43, qs=(2, 4)) -> BrownianReport:
    """(E|X_{t+h} - X_t - (B_{t+h} - B_t)|^q)^{1/q} over non-overlapping windows, and its slope in h."""
    D = paths.X - paths.B
    moments = {q: [] for q in qs}
    ses = {q: [] for q in qs}
    live = ~paths.frozen
    for h in hs:
        m = int(round(h / paths.dt))
        if m < 1 or abs(m * paths.dt - h) > 1e-9 or m >= D.shape[1]:
            raise DomainError(f"h={h} is not a multiple of the recording step within the horizon")
        starts = np.arange(0, D.shape[1] - m, m)
        inc = D[live][:, starts + m] - D[live][:, starts]
        for q in qs:
            per_path = (np.abs(inc) ** q).mean(axis=1)
            mean, se = _mc(per_path)
            moments[q].append(mean ** (1.0 / q))
            ses[q].append((se / q) * mean ** (1.0 / q - 1) if mean > 0 else 0.0)
    slopes = {}
    for q in qs:
        vals = moments[q]
        slopes[q] = float("inf") if max(vals) <= 1e-300 else _slope(hs, vals)
    thr = (1 + beta) / 2 - 0.1
    passed = all(s >= thr for s in slopes.values())
    return BrownianReport([float(h) for h in hs], moments, ses, slopes, thr, bool(passed))


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov–Smirnov statistic sup |F_a - F_b|."""
    a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(Fa - Fb).max())


def bootstrap_band(a: np.ndarray, b: np.ndarray, n_boot: int = 200, level: float = 0.95, seed: int = 0) -> float:
    """Quantile of the KS statistic when both samples are redrawn from the pooled sample."""
    pooled = np.concatenate([a, b])
    rng = np.random.default_rng(seed)
    stats = [ks_distance(rng.choice(pooled, a.size), rng.choice(pooled, b.size)) for _ in range(n_boot)]
    return float(np.quantile(stats, level))


@dataclass
class LawReport:
    levels: tuple
    ks: float
    band: float
    passed: bool
    frozen: list
    endpoints: dict = field(repr=False, default_factory=dict)


def level_seed(seed: int, level: int) -> int:
    """Independent seeds for different mollification levels, derived from (seed, level)."""
    return int(np.random.SeedSequence([seed, level]).generate_state(1)[0])


def two_scheme_law_comparison(env: Environment, levels=(16, 32), x0: float = 0.0, T: float | None = None,
                              dt: float = 2.0**-10, n_paths: int = 10_000, seed: int = 0, n_boot: int = 200,
                              workers: int | None = None) -> LawReport:
    """KS distance between the laws of X_T at two mollification levels, against a bootstrap band."""
    ends, frozen = {}, []
    for n in levels:
        p = simulate_euler(env.mollified(n), x0, dt, n_paths, level_seed(seed, n), T=T,
                           record_every=int(round(((T or env.T0) - env.Y.t0) / dt)), workers=workers)
        ends[n] = p.X[:, -1]
        frozen.append(p.frozen_fraction)
    a, b = ends[levels[0]], ends[levels[1]]
    d = ks_distance(a, b)
    band = bootstrap_band(a, b, n_boot, seed=seed)
    return LawReport(tuple(levels), d, band, bool(d <= band and max(frozen) < 0.01), frozen, ends)


@dataclass
class MomentReport:
    levels: list
    estimates: list
    se: list
    ratio: float
    passed: bool


def exponential_moment_check(env: Environment, levels=(16, 32), x0: float = 0.0, dt: float = 2.0**-10,
                             n_paths: int = 10_000, seed: int = 0, T: float | None = None) -> MomentReport:
    """E exp(|X_T|) per mollification level; stable if the extreme ratio lies in [0.5, 2]."""
    est, ses = [], []
    for n in levels:
        p = simulate_euler(env.mollified(n), x0, dt, n_paths, level_seed(seed, n), T=T,
                           record_every=int(round(((T or env.T0) - env.Y.t0) / dt)))
        m, s = _mc(np.exp(np.abs(p.X[:, -1])))
        est.append(m)
        ses.append(s)
    ratio = max(est) / min(est)
    ok = all(np.isfinite(est)) and 0.5 <= min(est) / max(est) and ratio <= 2.0
    return MomentReport(list(levels), est, ses, float(ratio), bool(ok))


@dataclass
class TelescopeReport:
    mean: float
    se: float
    passed: bool


def telescoping_check(env: Environment, paths: SdePaths, n_coarse: int, steps: int = 16) -> TelescopeReport:
    """X_T - x0 - sum_k b(t_k, X_{t_k}, Delta) - (B_T - B_0) has mean zero."""
    T = paths.T
    H = (T - paths.t0) / n_coarse
    live = ~paths.frozen
    X, B = paths.X[live], paths.B[live]
    total = X[:, -1] - paths.x0 - (B[:, -1] - B[:, 0])
    for k in range(n_coarse):
        t = paths.t0 + k * H
        j = paths.index(t)
        xs = X[:, j]
        prof = drift_profile(env, t, H, xs, steps)
        total = total - prof(xs)
    m, s = _mc(total)
    return TelescopeReport(m, s, _within(m, s, 0.0))
