"""Mild solutions of d_t u + (1/2) d_xx u + d_x Y_t d_x u = f through a Picard fixed point on the gradient."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, IntegrityError
from .heat import heat_time_integral, heat_time_transform, mollify, semigroup_values
from .holder import GridPath, HolderParams, TimeSpaceField, holder_exponent_fit
from .lift import RoughLift, assemble_lift


@dataclass
class MildProblem:
    """Terminal-value problem on the lift's time grid [t0, T].

    ``uT_prime`` holds the derivative of the terminal condition; ``f`` (optional) is the source
    sampled on the same time and space grid as the lift.
    """

    lift: RoughLift
    uT: GridPath
    uT_prime: GridPath
    f: TimeSpaceField | None = None
    params: HolderParams = field(default_factory=HolderParams)
    gamma: float = 1.0
    tol: float = 1e-6
    max_iter: int = 60
    max_slope: float = 1e8

    def __post_init__(self):
        L = self.lift
        for p in (self.uT, self.uT_prime):
            if p.M != L.M or abs(p.x0 - L.x0) > 1e-9 or abs(p.dx - L.dx) > 1e-12:
                raise DomainError("terminal data must live on the lift's space grid")
        d = self.uT_prime.values
        if not np.all(np.isfinite(d)) or np.abs(d).max() > self.max_slope:
            raise DomainError("terminal condition must have a bounded derivative")
        # the stored derivative has to describe uT: cell slopes against the mean endpoint derivative
        slopes = np.diff(self.uT.values) / L.dx
        mismatch = np.abs(slopes - 0.5 * (d[1:] + d[:-1])).max()
        if mismatch > 1e-2 * (1.0 + np.abs(d).max()) + np.abs(np.diff(d)).max():
            raise DomainError("uT_prime is inconsistent with uT (unbounded or missing derivative)")
        if self.f is not None and self.f.values.shape != L.Y.shape:
            raise DomainError("source must be sampled on the lift's time-space grid")

    @property
    def T(self) -> float:
        return self.lift.T

    @classmethod
    def from_functions(cls, lift: RoughLift, uT, uT_prime, f=None, **kw) -> "MildProblem":
        x = lift.x
        uT_path = GridPath(lift.x0, lift.dx, np.asarray(uT(x), dtype=float) * np.ones_like(x))
        d_path = GridPath(lift.x0, lift.dx, np.asarray(uT_prime(x), dtype=float) * np.ones_like(x))
        src = None
        if f is not None:
            tt, xx = np.meshgrid(lift.times, x, indexing="ij")
            src = TimeSpaceField(lift.t0, lift.dt, lift.x0, lift.dx, np.asarray(f(tt, xx), dtype=float) * np.ones_like(tt))
        return cls(lift, uT_path, d_path, src, **kw)


@dataclass
class MildSolution:
    u: TimeSpaceField
    v: TimeSpaceField
    residual: float
    iterations: int
    history: list
    converged: bool = True
    non_contraction: bool = False

    @property
    def dWv(self) -> TimeSpaceField:
        """Gubinelli derivative of v against (Y, Z): (0, v)."""
        vals = np.stack([np.zeros_like(self.v.values), self.v.values], axis=-1)
        return self.v.with_values(vals)


def terminal_profile(uT: GridPath, f: TimeSpaceField | None, T: float, t0: float, dt: float,
                     uT_prime: GridPath | None = None):
    """phi_t = P_{T-t} uT - int_t^T P_{s-t} f_s ds and psi = d_x phi on the slices of [t0, T].

    uT is continued linearly outside its grid and uT' by constants, matching affine growth.
    """
    N = int(round((T - t0) / dt))
    if N < 1 or abs(t0 + N * dt - T) > 1e-9:
        raise DomainError("T must be reachable from t0 in whole steps")
    dx = uT.dx
    if uT_prime is None:
        uT_prime = uT.with_values(np.gradient(uT.values, dx))
    phi = np.empty((N + 1, uT.M + 1))
    psi = np.empty_like(phi)
    phi[N], psi[N] = uT.values, uT_prime.values
    for k in range(N):
        tau = (N - k) * dt
        phi[k] = semigroup_values(uT.values, dx, tau, 0, "linear")
        psi[k] = semigroup_values(uT_prime.values, dx, tau, 0, "constant")
    if f is not None:
        phi -= heat_time_integral(f.values, dt, dx, k=0)
        psi -= heat_time_integral(f.values, dt, dx, k=1)
    mk = lambda a: TimeSpaceField(t0, dt, uT.x0, dx, a)
    return mk(phi), mk(psi)


def _primitive(v: np.ndarray, lift: RoughLift) -> np.ndarray:
    """H_s(y) = int_{x_0}^y v_s dY_s as compensated sums with d_W v = (0, v)."""
    if lift.J is None:
        raise IntegrityError("lift is missing its cross component")
    cells = v[:, :-1] * (np.diff(lift.Y, axis=1) + _cell_cross_all(lift))
    return np.concatenate([np.zeros((v.shape[0], 1)), np.cumsum(cells, axis=1)], axis=1)


def _cell_cross_all(lift: RoughLift) -> np.ndarray:
    return np.diff(lift.J, axis=1) - lift.Z[:, :-1] * np.diff(lift.Y, axis=1)


def picard_operator(v, lift: RoughLift) -> np.ndarray:
    """(M v)_t(x) = int_t^T int d^2_x p_{s-t}(x-y) int_x^y v_s dY_s dy ds on every slice.

    ``v`` is an array (N+1, M+1) or a TimeSpaceField; its Gubinelli derivative is (0, v).  The inner
    rough integral is additive on the grid, so it enters through the primitive H_s, and the time
    integral is done by :func:`heat_time_transform` (no singular quadrature needed).
    """
    vals = v.values if isinstance(v, TimeSpaceField) else np.asarray(v, dtype=float)
    if vals.shape != lift.Y.shape:
        raise DomainError("v must live on the lift's grid")
    H = _primitive(vals, lift)
    return heat_time_transform(H, lift.dt, lift.dx, lift.extend)


def reconstruct_u(phi: np.ndarray, v: np.ndarray, lift: RoughLift) -> np.ndarray:
    """u_t = phi_t + int_t^T int d_x p_{s-t}(x-y) int_x^y v_s dY_s dy ds."""
    H = _primitive(v, lift)
    return phi + heat_time_integral(H, lift.dt, lift.dx, k=1, extend=lift.extend)


def solve_mild(p: MildProblem, raise_on_failure: bool = True) -> MildSolution:
    """Picard iteration v <- psi + M v from v = psi, then reconstruction of u.

    The returned v is the last iterate whose fixed-point residual ||v - psi - M v||_inf is known
    exactly; that residual is reported.  Residuals that fail to decrease three times in a row flag
    non-contraction.
    """
    L = p.lift
    phi, psi = terminal_profile(p.uT, p.f, L.T, L.t0, L.dt, p.uT_prime)
    v = psi.values.copy()
    history = []
    stalls = 0
    non_contraction = False
    converged = False
    it = 0
    for it in range(1, p.max_iter + 1):
        nxt = psi.values + picard_operator(v, L)
        res = float(np.abs(nxt - v).max())
        history.append(res)
        if len(history) > 1 and res >= history[-2]:
            stalls += 1
            if stalls >= 3:
                non_contraction = True
        else:
            stalls = 0
        if res <= p.tol:
            converged = True
            break
        if not np.isfinite(res) or non_contraction and raise_on_failure:
            break
        v = nxt
    if not converged and raise_on_failure:
        kind = "non-contraction" if non_contraction else "iteration budget exhausted"
        raise ConvergenceError(f"Picard iteration failed ({kind}); residuals {history}")
    u = reconstruct_u(phi.values, v, L)
    u[-1] = p.uT.values
    mk = lambda a: TimeSpaceField(L.t0, L.dt, L.x0, L.dx, a)
    return MildSolution(mk(u), mk(v), history[-1], it - 1 if converged else it, history, converged, non_contraction)


def natural_formulation(sol: MildSolution, p: MildProblem) -> np.ndarray:
    """u from P_{T-t} uT - int P f + int_t^T P_{s-t}(v_s d_x Y_s) ds, valid for smooth Y only."""
    L = p.lift
    phi, _ = terminal_profile(p.uT, p.f, L.T, L.t0, L.dt, p.uT_prime)
    dY = np.gradient(L.Y, L.dx, axis=1)
    return phi.values + heat_time_integral(sol.v.values * dY, L.dt, L.dx, k=0, extend=L.extend)


def pde_residual(sol: MildSolution, Y: np.ndarray, f: np.ndarray | None = None) -> np.ndarray:
    """Strong residual d_t u + u_xx / 2 + d_x Y d_x u - f at interior nodes (centred differences)."""
    u = sol.u.values
    dt, dx = sol.u.dt, sol.u.dx
    ut = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dt)
    um = u[1:-1]
    uxx = (um[:, 2:] - 2 * um[:, 1:-1] + um[:, :-2]) / dx**2
    ux = (um[:, 2:] - um[:, :-2]) / (2 * dx)
    Ym = Y[1:-1]
    Yx = (Ym[:, 2:] - Ym[:, :-2]) / (2 * dx)
    r = ut + 0.5 * uxx + Yx * ux
    if f is not None:
        r -= f[1:-1, 1:-1]
    return r


@dataclass
class RegularityReport:
    u_time: float | str
    v_time: float | str
    v_space: float | str
    growth_rate: float
    targets: dict


def _fit_or_exact(F: TimeSpaceField, axis: str, scales) -> float | str:
    vals = F.values
    if np.ptp(vals, axis=0 if axis == "t" else 1).max() <= 1e-12 * max(1.0, np.abs(vals).max()):
        return "exact"
    if axis == "t":
        d = np.diff(vals, axis=0)
        if np.abs(d).max() < 1e-12:
            return "exact"
    return holder_exponent_fit(F, scales, axis=axis, mode="max")


def regularity_report(sol: MildSolution, beta: float = 0.43, window: float | None = None) -> RegularityReport:
    """Fitted Hölder exponents of u and v over dyadic lags, and an exponential growth rate in |x|."""
    x = sol.u.x
    keep = slice(None) if window is None else (np.abs(x) <= window)
    u = sol.u.with_values(sol.u.values[:, keep]) if window is not None else sol.u
    v = sol.v.with_values(sol.v.values[:, keep]) if window is not None else sol.v
    nt = u.N
    tscales = [s for s in (1, 2, 4, 8) if s <= nt // 2] or [1]
    xscales = [s for s in (1, 2, 4, 8, 16) if s <= u.M // 2]
    u_lin = np.abs(np.diff(u.values, axis=0)).max() < 1e-12
    u_time = "exact" if u_lin else (holder_exponent_fit(u, tscales, axis="t", mode="max") if len(tscales) >= 3 else float("nan"))
    v_flat = np.abs(np.diff(v.values, axis=0)).max() < 1e-12
    v_time = "exact" if v_flat else (holder_exponent_fit(v, tscales, axis="t", mode="max") if len(tscales) >= 3 else float("nan"))
    v_const = np.abs(np.diff(v.values, axis=1)).max() < 1e-12
    v_space = "exact" if v_const else holder_exponent_fit(v, xscales, axis="x", mode="block")
    # exponential envelope: slope of log max_{|x| >= r} |u| against r
    r = np.abs(sol.u.x)
    env = np.array([np.abs(sol.u.values[:, r >= q]).max() for q in np.unique(r)])
    rates = np.unique(r)
    good = env > 0
    growth = float(np.polyfit(rates[good], np.log(env[good]), 1)[0]) if good.sum() > 2 else 0.0
    targets = {"u_time": (1 + beta) / 2, "v_time": beta / 2, "v_space": beta}
    return RegularityReport(u_time, v_time, v_space, growth, targets)


@dataclass
class StabilityReport:
    levels: list
    du: list
    dv: list
    passed: bool


def stability_study(p: MildProblem, Y: TimeSpaceField, levels, window: float = 2.0) -> StabilityReport:
    """Solve with lifts of mollified environments; distances to the unmollified solution on [-window, window]."""
    levels = sorted(int(n) for n in levels)
    if len(levels) < 2:
        raise DomainError("need at least two mollification levels")
    base = solve_mild(p)
    keep = np.abs(p.lift.x) <= window
    du, dv = [], []
    for n in levels:
        lift_n = assemble_lift(mollify(Y, n, p.lift.extend), p.lift.T, p.lift.params, p.lift.extend,
                               validate=False, check_regularity=False)
        pn = MildProblem(lift_n, p.uT, p.uT_prime, p.f, p.params, p.gamma, p.tol, p.max_iter)
        sol = solve_mild(pn)
        du.append(float(np.abs(sol.u.values[:, keep] - base.u.values[:, keep]).max()))
        dv.append(float(np.abs(sol.v.values[:, keep] - base.v.values[:, keep]).max()))
    tiny = 1e-9
    down = lambda s: all(b < a or a <= tiny for a, b in zip(s, s[1:]))
    return StabilityReport(levels, du, dv, bool(down(du) and down(dv)))
