"""Adapted Riemann sums against pseudo-increments and their L^p convergence along dyadic subdivisions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError


@dataclass
class SampledPath:
    """Monte Carlo replicates of named processes on a uniform time grid: arrays (replicates, times)."""

    t0: float
    dt: float
    data: dict

    def __post_init__(self):
        shapes = {np.shape(v) for v in self.data.values()}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise DomainError("all components need the same (replicates, times) shape")

    @classmethod
    def from_sde(cls, paths) -> "SampledPath":
        return cls(paths.t0, paths.dt, {"X": paths.X, "B": paths.B})

    @property
    def n_times(self) -> int:
        return next(iter(self.data.values())).shape[1]

    @property
    def T(self) -> float:
        return self.t0 + self.dt * (self.n_times - 1)

    def index(self, t: float) -> int:
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k >= self.n_times or abs(self.t0 + k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"time {t} is not on the path grid")
        return k

    def __call__(self, name: str, t: float) -> np.ndarray:
        return self.data[name][:, self.index(t)]

    def prefix(self, t: float) -> "SampledPath":
        """The path observed up to time t (later samples are cut off)."""
        k = self.index(t)
        return SampledPath(self.t0, self.dt, {n: v[:, : k + 1] for n, v in self.data.items()})

    def last(self, name: str) -> np.ndarray:
        return self.data[name][:, -1]


@dataclass
class PseudoIncrementProvider:
    """A(t, t+h) evaluated on a sampled path; ``additive`` marks A(s,t) + A(t,u) = A(s,u)."""

    eval: Callable
    additive: bool = False
    exponents: tuple = (0.5, 1.0, 1.0)

    def __call__(self, path: SampledPath, t: float, h: float) -> np.ndarray:
        if h == 0:
            return np.zeros(next(iter(path.data.values())).shape[0])
        return np.asarray(self.eval(path, t, h), dtype=float)


@dataclass
class AdaptedProcess:
    """psi_t, computed from the path prefix up to t only."""

    eval: Callable
    holder_target: float = 0.0

    def __call__(self, path: SampledPath, t: float) -> np.ndarray:
        return np.asarray(self.eval(path.prefix(t), t), dtype=float)


def increments(name: str, exponents=(0.5, 10.0, 10.0)) -> PseudoIncrementProvider:
    """A(t, t+h) = P_{t+h} - P_t for a recorded component P."""
    return PseudoIncrementProvider(lambda p, t, h: p(name, t + h) - p(name, t), True, exponents)


def constant_process(c: float) -> AdaptedProcess:
    return AdaptedProcess(lambda p, t: np.full(next(iter(p.data.values())).shape[0], float(c)), 0.0)


def current_value(name: str, holder_target: float = 0.0) -> AdaptedProcess:
    """psi_t = P_t, read from the last sample of the prefix."""
    return AdaptedProcess(lambda p, t: p.last(name), holder_target)


@dataclass(frozen=True)
class Subdivision:
    times: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise DomainError("a subdivision needs at least two points")
        if not np.all(np.diff(t) > 0):
            raise DomainError("subdivision points must be strictly increasing")
        if t[0] != 0.0:
            raise DomainError("a subdivision starts at 0")
        object.__setattr__(self, "times", tuple(float(s) for s in t))

    @classmethod
    def dyadic(cls, T: float, level: int) -> "Subdivision":
        return cls(tuple(T * np.arange(2**level + 1) / 2**level))

    @property
    def T(self) -> float:
        return self.times[-1]

    @property
    def mesh(self) -> float:
        return float(np.diff(self.times).max())

    def __len__(self):
        return len(self.times)

    def __contains__(self, other) -> bool:
        return set(other.times) <= set(self.times)


def adapted_riemann_sum(A: PseudoIncrementProvider, psi: AdaptedProcess, path: SampledPath,
                        delta: Subdivision) -> np.ndarray:
    """S(Delta) = sum_i psi_{t_i} A(t_i, t_{i+1}), one value per replicate."""
    if delta.T > path.T + 1e-12:
        raise DomainError("subdivision runs past the sampled path")
    t = delta.times
    total = np.zeros(next(iter(path.data.values())).shape[0])
    for a, b in zip(t[:-1], t[1:]):
        total += psi(path, a) * A(path, a, b - a)
    return total


def split_mr(A: PseudoIncrementProvider, path: SampledPath, t: float, h: float, estimator: Callable):
    """R = estimator(prefix, t, h), the conditional mean of A(t, t+h); M = A - R."""
    R = np.asarray(estimator(path.prefix(t), t, h), dtype=float)
    M = A(path, t, h) - R
    return M, R


@dataclass
class RateReport:
    levels: list
    norms: list
    se: list
    eta_hat: float | str
    ci: tuple
    eta_theory: float
    limit: float
    limit_se: float
    passed: bool
    epsilon2_hat: float | None = None
    out_of_hypothesis: bool = False
    finest: np.ndarray = field(default=None, repr=False)


def theoretical_eta(eps0: float, eps1: float, eps1p: float, eps2: float) -> float:
    return min(eps0 - eps2, eps1, eps1p / 2)


def _decay_exponent(meshes, norms) -> float:
    return float(np.polyfit(np.log(meshes), np.log(norms), 1)[0])


def lp_holder_exponent(psi: AdaptedProcess, path: SampledPath, lags, p: float = 2.0) -> float:
    """Fitted epsilon_2 in E|psi_{t+h} - psi_t|^p ^{1/p} ~ h^{1/2 - epsilon_2}."""
    n = path.n_times
    vals = np.stack([psi(path, path.t0 + k * path.dt) for k in range(n)], axis=1)
    hs, ms = [], []
    for lag in lags:
        if lag >= n:
            continue
        d = vals[:, lag:] - vals[:, :-lag]
        m = (np.abs(d) ** p).mean() ** (1 / p)
        if m > 0:
            hs.append(lag * path.dt)
            ms.append(m)
    if len(hs) < 2:
        return -np.inf
    return 0.5 - _decay_exponent(hs, ms)


def lp_cauchy_rate(A: PseudoIncrementProvider, psi: AdaptedProcess, sampler: Callable, p: float = 2.0,
                   levels=(2, 3, 4, 5, 6), n_reps: int = 2000, seed: int = 0, T: float = 1.0,
                   n_boot: int = 500, oracle: Callable | None = None) -> RateReport:
    """(E|S(Delta_k) - S(Delta_{k+1})|^p)^{1/p} for dyadic Delta_k; decay exponent with a bootstrap CI.

    ``sampler(n_reps, seed)`` returns a SampledPath whose grid contains the finest subdivision.
    ``oracle(path)`` (optional) gives the exact integral per replicate; ``limit`` then reports the
    mean of S(finest) - oracle.
    """
    levels = sorted(int(k) for k in levels)
    if len(levels) < 3:
        raise DomainError("need at least three dyadic levels")
    path = sampler(n_reps, seed)
    sums = [adapted_riemann_sum(A, psi, path, Subdivision.dyadic(T, k)) for k in levels]
    diffs = np.stack([sums[i] - sums[i + 1] for i in range(len(levels) - 1)])
    meshes = np.array([T / 2**k for k in levels[:-1]])
    mom = (np.abs(diffs) ** p).mean(axis=1)
    norms = mom ** (1 / p)
    se = np.array([(np.abs(d) ** p).std(ddof=1) / np.sqrt(d.size) for d in diffs])
    se = np.where(mom > 0, se / p * mom ** (1 / p - 1), 0.0)
    eps0, eps1, eps1p = A.exponents
    eta_th = theoretical_eta(eps0, eps1, eps1p, psi.holder_target)
    finest = sums[-1]
    target = oracle(path) if oracle is not None else np.zeros_like(finest)
    err = finest - target
    lim, lim_se = float(err.mean()), float(err.std(ddof=1) / np.sqrt(err.size))
    if oracle is None:
        lim, lim_se = float(finest.mean()), float(finest.std(ddof=1) / np.sqrt(finest.size))
    scale = max(1.0, float(np.abs(finest).max()))
    if norms.max() <= 1e-12 * scale:
        return RateReport(levels, norms.tolist(), se.tolist(), "exact", (np.inf, np.inf), eta_th, lim, lim_se,
                          True, finest=finest)
    eta = _decay_exponent(meshes, norms)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, diffs.shape[1], diffs.shape[1])
        nb = (np.abs(diffs[:, idx]) ** p).mean(axis=1) ** (1 / p)
        if np.all(nb > 0):
            boots.append(_decay_exponent(meshes, nb))
    ci = (float(np.quantile(boots, 0.025)), float(np.quantile(boots, 0.975)))
    eps2 = lp_holder_exponent(psi, path, [2**j for j in range(3)], p)
    return RateReport(levels, norms.tolist(), se.tolist(), eta, ci, eta_th, lim, lim_se, bool(ci[0] > 0),
                      eps2, bool(eps2 >= eps0), finest)


def gaps_ok(coarse: Subdivision, fine: Subdivision) -> bool:
    """Between two consecutive points of ``coarse`` there is at most one point of ``fine``."""
    c = np.asarray(coarse.times)
    f = np.setdiff1d(np.asarray(fine.times), c)
    cell = np.searchsorted(c, f)
    return bool(np.bincount(cell, minlength=len(c) + 1).max(initial=0) <= 1)


def _reduce_once(current: list, base: set) -> list:
    keep = []
    gap = []
    for s in current:
        if s in base:
            keep.extend(_thin(gap))
            gap = []
            keep.append(s)
        else:
            gap.append(s)
    return keep


def _thin(gap: list) -> list:
    """Delete the odd-indexed points of a gap (1-based), keeping the last one; a lone point goes."""
    L = len(gap)
    if L <= 1:
        return []
    return [s for i, s in enumerate(gap, start=1) if i % 2 == 0 or i == L]


def dyadic_reduce(delta_prime: Subdivision, delta: Subdivision) -> list:
    """Intermediate subdivisions Delta' = D_0 > D_1 > ... > D_M = Delta; returns D_1, ..., D_{M-1}."""
    if delta not in delta_prime:
        raise DomainError("delta must be contained in delta_prime")
    if abs(delta.T - delta_prime.T) > 0:
        raise DomainError("both subdivisions must end at the same T")
    base = set(delta.times)
    cur = list(delta_prime.times)
    chain = []
    while len(cur) > len(base):
        cur = _reduce_once(cur, base)
        chain.append(Subdivision(tuple(cur)))
    return chain[:-1]


@dataclass
class ReductionCheck:
    ok: bool
    steps: int
    Q: int
    reason: str = ""


def check_reduction(delta_prime: Subdivision, delta: Subdivision, chain: list | None = None) -> ReductionCheck:
    """Nesting, at most one removed point per gap at every step, and M in {Q+1, Q+2}."""
    chain = dyadic_reduce(delta_prime, delta) if chain is None else chain
    seq = [delta_prime] + list(chain) + ([delta] if delta_prime.times != delta.times else [])
    c = np.asarray(delta.times)
    extra = np.setdiff1d(np.asarray(delta_prime.times), c)
    L = np.bincount(np.searchsorted(c, extra), minlength=len(c) + 1)
    Q = int(np.floor(np.log2(L.max()))) if L.max() > 0 else -1
    M = len(seq) - 1
    for a, b in zip(seq, seq[1:]):
        if b not in a or delta not in b or len(b) >= len(a):
            return ReductionCheck(False, M, Q, "nesting")
        if not gaps_ok(b, a):
            return ReductionCheck(False, M, Q, "more than one point per gap")
    if M and M not in (Q + 1, Q + 2):
        return ReductionCheck(False, M, Q, "step count")
    return ReductionCheck(True, M, Q)


def random_pair(rng: np.random.Generator, P: int, T: float = 1.0):
    """A random dyadic subdivision of order <= P and a random sub-subdivision of it."""
    grid = np.arange(1, 2**P)
    fine = grid[rng.random(grid.size) < rng.uniform(0.2, 1.0)]
    coarse = fine[rng.random(fine.size) < rng.uniform(0.0, 0.5)]
    mk = lambda pts: Subdivision(tuple(np.concatenate([[0.0], T * pts / 2**P, [T]])))
    return mk(fine), mk(coarse)


def drift_estimator(env, steps: int = 16, name: str = "X") -> Callable:
    """R(t, t+h) = b(t, X_t, h) from the drift PDE, one solve per (t, h) for all replicates."""
    from .sde import drift_profile

    def est(prefix: SampledPath, t: float, h: float):
        xs = prefix.last(name)
        return drift_profile(env, t, h, xs, steps)(xs)

    return est


def drift_pseudo_increments(env, steps: int = 16, name: str = "X", exponents=(0.25, 0.1, 0.1)):
    """A(t, t+h) = b(t, X_t, h); not additive."""
    est = drift_estimator(env, steps, name)
    return PseudoIncrementProvider(lambda p, t, h: est(p.prefix(t), t, h), False, exponents)


@dataclass
class DriftIntegralReport:
    value: np.ndarray
    rate: RateReport
    levels: list


def drift_integral(psi: AdaptedProcess, env, path: SampledPath, levels=(2, 3, 4), steps: int = 16,
                   T: float | None = None) -> DriftIntegralReport:
    """Finest adapted sum of psi against R(t, t+h) = b(t, X_t, h), with the ladder of differences."""
    T = path.T if T is None else T
    A = drift_pseudo_increments(env, steps)
    levels = sorted(levels)
    sums = [adapted_riemann_sum(A, psi, path, Subdivision.dyadic(T, k)) for k in levels]
    diffs = [s1 - s0 for s0, s1 in zip(sums, sums[1:])]
    norms = [float(np.sqrt((d**2).mean())) for d in diffs]
    # each drift value carries the Picard tolerance of its solve
    if max(norms, default=0.0) <= 1e-8:
        eta = "exact"
        ci = (np.inf, np.inf)
    elif len(norms) >= 2 and min(norms) > 0:
        eta = _decay_exponent([T / 2**k for k in levels[:-1]], norms)
        ci = (np.nan, np.nan)
    else:
        eta, ci = float("nan"), (np.nan, np.nan)
    fin = sums[-1]
    rate = RateReport(levels, norms, [0.0] * len(norms), eta, ci, np.nan, float(fin.mean()),
                      float(fin.std(ddof=1) / np.sqrt(fin.size)) if fin.size > 1 else 0.0,
                      eta == "exact" or (isinstance(eta, float) and eta > 0), finest=fin)
    return DriftIntegralReport(fin, rate, levels)
