"""The two-dimensional lift (Y, Z^T) of an environment and its second-order increments."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, IntegrityError
from .heat import heat_time_transform, mollify, semigroup_values
from .holder import (GridPath, HolderParams, TimeSpaceField, TwoParamField, holder_exponent_fit,
                     kappa_growth, write_csv)
from .rough import RoughPath, chen_anchor_defect


class JointRegularityWarning(UserWarning):
    """Fitted time/space exponents do not meet the condition under which the lift is a Young limit."""


def _horizon_index(Y: TimeSpaceField, T: float) -> int:
    if Y.N == 0:
        raise DomainError("the environment needs a time grid")
    s = (T - Y.t0) / Y.dt
    n = int(round(s))
    if abs(s - n) > 1e-6 or n < 0 or n > Y.N:
        raise DomainError(f"horizon T={T} is not on the environment's time grid")
    return n


def _stieltjes(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid sums of f dg along the last axis, starting at 0."""
    cells = 0.5 * (f[..., 1:] + f[..., :-1]) * np.diff(g, axis=-1)
    return np.concatenate([np.zeros(f.shape[:-1] + (1,)), np.cumsum(cells, axis=-1)], axis=-1)


def build_Z(Y: TimeSpaceField, T: float, extend: str = "constant", split: bool = False):
    """Z^T_t(x) = int_t^T int d^2_x p_{s-t}(x-y) (Y_s(y) - Y_s(x)) dy ds on the slices t_k <= T.

    Returns a TimeSpaceField over [t0, T].  With ``split=True`` returns ``(Z, Z1, Z2)`` where
    Z1_t = 2 (P_{T-t} Y_t - Y_t) is the time-homogeneous part and Z2 = Z - Z1.
    """
    n = _horizon_index(Y, T)
    vals = Y.values[: n + 1]
    if vals.ndim == 3:
        raise DomainError("build_Z expects a scalar environment")
    Z = heat_time_transform(vals, Y.dt, Y.dx, extend)
    field_ = TimeSpaceField(Y.t0, Y.dt, Y.x0, Y.dx, Z)
    if not split:
        return field_
    Z1 = homogeneous_part(vals, Y.dt, Y.dx, extend)
    return field_, field_.with_values(Z1), field_.with_values(Z - Z1)


def homogeneous_part(vals: np.ndarray, dt: float, dx: float, extend: str = "constant") -> np.ndarray:
    N = vals.shape[0] - 1
    out = np.zeros_like(vals)
    for k in range(N):
        out[k] = 2 * (semigroup_values(vals[k], dx, (N - k) * dt, 0, extend) - vals[k])
    return out


def _homogeneous_primitive(y: np.ndarray, tau: float, dx: float, extend: str) -> np.ndarray:
    """Primitive J1 with I1(x, x') = J1(x') - J1(x) - Z1(x)(Y(x') - Y(x)).

    J1 = Z1 Y + Y^2 - 2 int Y d(P_tau Y), the outer integral taken as a trapezoid Stieltjes sum
    against the smoothed slice (d(P_tau Y) = d_x P_tau Y dy).
    """
    if tau <= 0:
        return np.zeros_like(y)
    py = semigroup_values(y, dx, tau, 0, extend)
    z1 = 2 * (py - y)
    return z1 * y + y * y - 2 * _stieltjes(y, py)


def cross_integral_homogeneous(Y_slice: GridPath, t: float, T: float, extend: str = "constant") -> TwoParamField:
    """I1(x, x') = int_x^x' (Z1(y) - Z1(x)) dY(y) for Z1 = 2 (P_{T-t} Y - Y), via the closed form

    (Z1(x') - Z1(x))(Y(x') - Y(x)) + (Y(x') - Y(x))^2 - 2 int_x^x' d_x P_{T-t} Y(y) (Y(y) - Y(x)) dy.
    """
    if not T > t:
        raise DomainError("need T > t")
    y = Y_slice.values
    J1 = _homogeneous_primitive(y, T - t, Y_slice.dx, extend)
    z1 = 2 * (semigroup_values(y, Y_slice.dx, T - t, 0, extend) - y)
    vals = J1[None, :] - J1[:, None] - z1[:, None] * (y[None, :] - y[:, None])
    np.fill_diagonal(vals, 0.0)
    return TwoParamField(Y_slice.x0, Y_slice.dx, vals)


def fitted_joint_exponents(Y: TimeSpaceField, n: int | None = None) -> dict:
    """Empirical exponents (alpha, nu, mu) with mu = 0, for the Young condition 2 nu + mu > 1 - alpha."""
    vals = Y.values if n is None else Y.values[: n + 1]
    F = Y.with_values(vals)
    alpha = holder_exponent_fit(F, (1, 2, 4, 8), axis="x") if F.M >= 8 else float("nan")
    inc = np.abs(np.diff(vals, axis=0)).max() if F.N >= 1 else 0.0
    if F.N < 4 or inc < 1e-14 * max(1.0, np.abs(vals).max()):
        nu = 1.0
    else:
        nu = min(1.0, holder_exponent_fit(F, (1, 2, 4), axis="t"))
    return {"alpha": alpha, "nu": nu, "mu": 0.0, "young": bool(2 * nu > 1 - alpha)}


def cross_integral_inhomogeneous(Y: TimeSpaceField, t: float, T: float, extend: str = "constant",
                                 Z2: TimeSpaceField | None = None, check: bool = True) -> TwoParamField:
    """I2(x, x') = int_x^x' (Z2(y) - Z2(x)) dY_t(y) as a Young integral on the grid."""
    n = _horizon_index(Y, T)
    k = _horizon_index(Y, t)
    if k > n:
        raise DomainError("need t <= T")
    if check:
        ex = fitted_joint_exponents(Y, n)
        if not ex["young"]:
            warnings.warn(f"joint regularity not met: 2nu+mu={2 * ex['nu']:.3f} <= 1-alpha={1 - ex['alpha']:.3f}",
                          JointRegularityWarning, stacklevel=2)
    if Z2 is None:
        _, _, Z2 = build_Z(Y, T, extend, split=True)
    z2 = Z2.values[k]
    y = Y.values[k]
    J2 = _stieltjes(z2, y)
    vals = J2[None, :] - J2[:, None] - z2[:, None] * (y[None, :] - y[:, None])
    np.fill_diagonal(vals, 0.0)
    return TwoParamField(Y.x0, Y.dx, vals)


def lift_chi_prime(chi: float, alpha: float, alpha_prime: float) -> float:
    return chi + alpha - alpha_prime + max(0.5 - alpha, 0.0) + 0.01


@dataclass
class RoughLift:
    """Lift of an environment on slices t_k <= T: W = (Y, Z^T) and the cross primitive J.

    The cross-integral I(x, x') = int_x^x' (Z(y) - Z(x)) dY(y) is stored through a primitive J with
    I(x, x') = J(x') - J(x) - Z(x)(Y(x') - Y(x)); every second-order component follows from
    (Y, Z, J), which makes the Chen relation hold by construction.
    """

    T: float
    t0: float
    dt: float
    x0: float
    dx: float
    Y: np.ndarray
    Z: np.ndarray
    J: np.ndarray
    params: HolderParams = field(default_factory=HolderParams)
    extend: str = "constant"
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.Y.shape[0] - 1

    @property
    def M(self) -> int:
        return self.Y.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.N + 1)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.M + 1)

    def Y_field(self) -> TimeSpaceField:
        return TimeSpaceField(self.t0, self.dt, self.x0, self.dx, self.Y)

    def Z_field(self) -> TimeSpaceField:
        return TimeSpaceField(self.t0, self.dt, self.x0, self.dx, self.Z)

    def W(self, k: int) -> GridPath:
        return GridPath(self.x0, self.dx, np.column_stack([self.Y[k], self.Z[k]]))

    def cross(self, k: int) -> np.ndarray:
        """I(x_i, x_j) for all grid pairs at slice k."""
        y, z, j = self.Y[k], self.Z[k], self.J[k]
        out = j[None, :] - j[:, None] - z[:, None] * (y[None, :] - y[:, None])
        np.fill_diagonal(out, 0.0)
        return out

    def cell_cross(self, k: int) -> np.ndarray:
        """I(x_i, x_{i+1}) for consecutive grid points at slice k."""
        y, z, j = self.Y[k], self.Z[k], self.J[k]
        return np.diff(j) - z[:-1] * np.diff(y)

    def WW(self, k: int) -> TwoParamField:
        """Second-order increments with components [[11, 12], [21, 22]]."""
        y, z = self.Y[k], self.Z[k]
        dy = y[None, :] - y[:, None]
        dz = z[None, :] - z[:, None]
        i21 = self.cross(k)
        vals = np.empty(dy.shape + (2, 2))
        vals[..., 0, 0] = 0.5 * dy * dy
        vals[..., 1, 1] = 0.5 * dz * dz
        vals[..., 1, 0] = i21
        vals[..., 0, 1] = dy * dz - i21
        return TwoParamField(self.x0, self.dx, vals)

    def rough_path(self, k: int, check: bool = False) -> RoughPath:
        return RoughPath(self.W(k), self.WW(k), self.params.alpha, check=check)

    def chen_defect_max(self) -> float:
        return max(chen_anchor_defect(self.W(k).values, self.WW(k).values) for k in range(self.N + 1))

    def kappa(self, alpha: float | None = None, chi: float | None = None) -> float:
        """sup over slices of the growth functional; on a grid not symmetric about 0 (a torus period)
        the single window is the whole grid."""
        alpha = self.params.alpha if alpha is None else alpha
        chi = self.params.chi if chi is None else chi
        best = 0.0
        for k in range(self.N + 1):
            W, WW = self.W(k), self.WW(k)
            centre = -self.x0 / self.dx
            symmetric = abs(centre - round(centre)) < 1e-9 and abs(2 * round(centre) - self.M) == 0
            if symmetric and round(centre) * self.dx >= 1 - 1e-12:
                best = max(best, kappa_growth(W, WW, alpha, chi))
            else:
                best = max(best, lift_window_norms(self.Y[k], self.Z[k], self.J[k], self.dx, alpha))
        return best

    def save(self, directory) -> Path:
        """One CSV per component per slice plus ``manifest.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        x = self.x
        xx, yy = np.meshgrid(x, x, indexing="ij")
        keys = np.column_stack([xx.ravel(), yy.ravel()])
        files = []
        for k in range(self.N + 1):
            write_csv(d / f"W_t{k:03d}.csv", ["x"], x[:, None], np.column_stack([self.Y[k], self.Z[k]]))
            ww = self.WW(k).values
            for a, b in ((0, 0), (0, 1), (1, 0), (1, 1)):
                name = f"WW{a + 1}{b + 1}_t{k:03d}.csv"
                write_csv(d / name, ["x", "y"], keys, ww[..., a, b].ravel())
                files.append(name)
        manifest = {
            "T": self.T, "t0": self.t0, "dt": self.dt, "n_slices": self.N + 1,
            "x0": self.x0, "dx": self.dx, "n_points": self.M + 1, "extend": self.extend,
            "params": {"alpha": self.params.alpha, "beta": self.params.beta, "chi": self.params.chi},
            "chen_defect_max": self.chen_defect_max(),
            "files": files,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return d


def lift_window_norms(y, z, j, dx, alpha) -> float:
    """||(Y, Z)||_alpha + ||WW||_{2 alpha} over all pairs of one slice."""
    n = len(y)
    a = b = 0.0
    for lag in range(1, n):
        dy = y[lag:] - y[:-lag]
        dz = z[lag:] - z[:-lag]
        a = max(a, np.sqrt(dy * dy + dz * dz).max() / (lag * dx) ** alpha)
        fwd = j[lag:] - j[:-lag] - z[:-lag] * dy
        bwd = j[:-lag] - j[lag:] + z[lag:] * dy
        for i21, sgn in ((fwd, 1.0), (bwd, -1.0)):
            d_y, d_z = sgn * dy, sgn * dz
            i12 = d_y * d_z - i21
            mag = np.sqrt(0.25 * d_y**4 + 0.25 * d_z**4 + i21**2 + i12**2)
            b = max(b, mag.max() / (lag * dx) ** (2 * alpha))
    return a + b


def assemble_lift(Y: TimeSpaceField, T: float, params: HolderParams | None = None, extend: str = "constant",
                  validate: bool = True, tol: float = 1e-8, check_regularity: bool = True) -> RoughLift:
    """Lift of Y on the slices t_k <= T: Z = Z1 + Z2, I = I1 + I2 and the closed-form components."""
    params = params or HolderParams()
    n = _horizon_index(Y, T)
    vals = Y.values[: n + 1]
    Z, Z1, Z2 = build_Z(Y, T, extend, split=True)
    J = np.zeros_like(vals)
    for k in range(n + 1):
        tau = (n - k) * Y.dt
        J[k] = _homogeneous_primitive(vals[k], tau, Y.dx, extend) + _stieltjes(Z2.values[k], vals[k])
    diagnostics = {}
    if check_regularity:
        ex = fitted_joint_exponents(Y, n)
        diagnostics["joint_exponents"] = ex
        diagnostics["status"] = "young" if ex["young"] else "diagnostic"
        if not ex["young"]:
            warnings.warn("joint regularity not met; lift reported as diagnostic", JointRegularityWarning,
                          stacklevel=2)
    lift = RoughLift(T, Y.t0, Y.dt, Y.x0, Y.dx, vals.copy(), Z.values.copy(), J, params, extend, diagnostics)
    if validate:
        for k in range(n + 1):
            W = lift.W(k).values
            WW = lift.WW(k).values
            scale = max(1.0, float(np.abs(W).max()) ** 2)
            d = chen_anchor_defect(W, WW)
            if d > tol * scale:
                raise IntegrityError(f"Chen defect {d:.3e} at slice {k}")
        diagnostics["chen_defect_max"] = lift.chen_defect_max()
    return lift


@dataclass
class CauchyReport:
    levels: list
    dY: list
    dZ: list
    dWW: list
    kappa: list
    kappa_reference: float
    passed: bool
    decreasing: bool
    kappa_ratio: float


def _diff_norms(ref: RoughLift, other: RoughLift, alpha_p: float, window=None):
    """sup over slices of ||Y^n - Y||_{0,a'}, ||Z^n - Z||_{0,a'} and ||WW^n - WW||_{2a'}."""
    i, j = (0, ref.M) if window is None else GridPath(ref.x0, ref.dx, ref.Y[0]).index_range(window)
    dY = dZ = dW = 0.0
    for k in range(ref.N + 1):
        sl = slice(i, j + 1)
        y1, z1, j1 = ref.Y[k, sl], ref.Z[k, sl], ref.J[k, sl]
        y2, z2, j2 = other.Y[k, sl], other.Z[k, sl], other.J[k, sl]
        n = len(y1)
        ey, ez = y2 - y1, z2 - z1
        hy = hz = hw = 0.0
        for lag in range(1, n):
            h = (lag * ref.dx)
            hy = max(hy, np.abs(ey[lag:] - ey[:-lag]).max() / h**alpha_p)
            hz = max(hz, np.abs(ez[lag:] - ez[:-lag]).max() / h**alpha_p)
            comps = []
            for (yy, zz, jj) in ((y1, z1, j1), (y2, z2, j2)):
                dy, dz = yy[lag:] - yy[:-lag], zz[lag:] - zz[:-lag]
                i21 = jj[lag:] - jj[:-lag] - zz[:-lag] * dy
                comps.append(np.stack([0.5 * dy * dy, dy * dz - i21, i21, 0.5 * dz * dz]))
            hw = max(hw, np.sqrt(((comps[1] - comps[0]) ** 2).sum(axis=0)).max() / h ** (2 * alpha_p))
        dY = max(dY, np.abs(ey).max() + hy)
        dZ = max(dZ, np.abs(ez).max() + hz)
        dW = max(dW, hw)
    return dY, dZ, dW


def geometric_cauchy_study(Y: TimeSpaceField, T: float, levels, alpha_prime: float = 0.4, chi: float = 0.1,
                           params: HolderParams | None = None, extend: str = "constant", window=None,
                           kappa_ratio_max: float = 3.0) -> CauchyReport:
    """Distances between the lift of mollified environments and the lift of Y, level by level."""
    levels = sorted(int(n) for n in levels)
    if len(levels) < 3:
        raise DomainError("need at least three mollifier levels")
    params = params or HolderParams()
    chi_p = lift_chi_prime(chi, params.alpha, alpha_prime)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", JointRegularityWarning)
        ref = assemble_lift(Y, T, params, extend, validate=False)
        dY, dZ, dW, kap = [], [], [], []
        for n in levels:
            lift_n = assemble_lift(mollify(Y, n, extend), T, params, extend, validate=False)
            a, b, c = _diff_norms(ref, lift_n, alpha_prime, window)
            dY.append(a)
            dZ.append(b)
            dW.append(c)
            kap.append(lift_n.kappa(alpha_prime, chi_p))
    kref = ref.kappa(alpha_prime, chi_p)

    def strictly_down(seq):
        scale = max(seq) if seq else 0.0
        if scale <= 1e-13:
            return True
        return all(b < a for a, b in zip(seq, seq[1:]))

    decreasing = strictly_down(dY) and strictly_down(dZ) and strictly_down(dW)
    kmax, kmin = max(kap), min(kap)
    ratio = kmax / kmin if kmin > 0 else (1.0 if kmax == 0 else float("inf"))
    return CauchyReport(levels, dY, dZ, dW, kap, kref, bool(decreasing and ratio <= kappa_ratio_max), decreasing, ratio)
