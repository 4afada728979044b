"""Heat kernel, heat semigroup on grids, mollification and singular-in-time quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil, sqrt

import numpy as np
from numpy.polynomial.hermite_e import hermeval
from scipy.special import ndtr

from .errors import DomainError
from .holder import GridPath, TimeSpaceField

TAIL = 8.0          # kernel truncation, in standard deviations
RESOLVED = 1.5      # sqrt(t)/dx above which trapezoid weights are used
_SQRT2PI = sqrt(2 * np.pi)
EXTENSIONS = ("constant", "linear", "quadratic", "periodic")


def kernel(t: float, x, k: int = 0):
    """k-th spatial derivative of the Gaussian density with variance t.

    Uses d^k/dx^k p_t(x) = (-1)^k t^(-k/2) He_k(x/sqrt t) p_t(x) with He_k the
    probabilists' Hermite polynomials.
    """
    if not t > 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    if k not in range(5):
        raise DomainError("derivative order must be in 0..4")
    x = np.asarray(x, dtype=float)
    z = x / sqrt(t)
    dens = np.exp(-0.5 * z * z) / (_SQRT2PI * sqrt(t))
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    out = (-1) ** k * t ** (-k / 2) * hermeval(z, coef) * dens
    return float(out) if out.ndim == 0 else out


def _second_primitive(t: float, z: np.ndarray, k: int) -> np.ndarray:
    """k-th derivative of G with G'' = p_t."""
    s = sqrt(t)
    if k == 0:
        u = z / s
        return s * (u * ndtr(u) + np.exp(-0.5 * u * u) / _SQRT2PI)
    if k == 1:
        return ndtr(z / s)
    return kernel(t, z, k - 2)


@lru_cache(maxsize=4096)
def conv_weights(t: float, k: int, dx: float) -> np.ndarray:
    """Convolution weights w[m], m = -P..P, with sum_m w[m] f(x - m dx) ~ d^k P_t f(x).

    Resolved times use trapezoid weights ``dx * kernel``; for sqrt(t) < 1.5 dx the weights
    integrate the kernel exactly against the piecewise-linear interpolant of f, which keeps
    small-time values accurate where trapezoid sampling of the kernel breaks down.
    """
    if not t > 0:
        raise DomainError(f"semigroup time must be positive, got {t}")
    s = sqrt(t)
    P = max(1, ceil(TAIL * s / dx))
    m = np.arange(-P, P + 1) * dx
    if s >= RESOLVED * dx:
        w = dx * kernel(t, m, k)
    else:
        P = max(P, k + 2)
        m = np.arange(-P, P + 1) * dx
        w = (_second_primitive(t, m + dx, k) - 2 * _second_primitive(t, m, k)
             + _second_primitive(t, m - dx, k)) / dx
    w.setflags(write=False)
    return w


def _pad(values: np.ndarray, P: int, extend: str) -> np.ndarray:
    """Pad along the last axis by P points."""
    width = [(0, 0)] * (values.ndim - 1) + [(P, P)]
    if extend == "constant":
        return np.pad(values, width, mode="edge")
    if extend == "periodic":
        return np.pad(values, width, mode="wrap")
    if extend == "linear":
        out = np.pad(values, width, mode="edge")
        steps = np.arange(1, P + 1)
        left = values[..., 1] - values[..., 0]
        right = values[..., -1] - values[..., -2]
        out[..., :P] -= left[..., None] * steps[::-1]
        out[..., -P:] += right[..., None] * steps
        return out
    if extend == "quadratic":
        # Newton continuation through the three outermost points on each side
        if values.shape[-1] < 3:
            raise DomainError("quadratic continuation needs three grid points")
        out = np.pad(values, width, mode="edge")
        s = np.arange(1, P + 1)
        for left in (True, False):
            a, b, c = (values[..., i] for i in ((0, 1, 2) if left else (-1, -2, -3)))
            d1, d2 = a - b, a - 2 * b + c
            ext = a[..., None] + d1[..., None] * s + d2[..., None] * (s * (s + 1) / 2)
            if left:
                out[..., :P] = ext[..., ::-1]
            else:
                out[..., -P:] = ext
        return out
    raise DomainError(f"unknown extension {extend!r}; expected one of {EXTENSIONS}")


def convolve_rows(values: np.ndarray, weights: np.ndarray, extend: str = "constant") -> np.ndarray:
    """Apply a centred convolution along the last axis of a 1-D or 2-D array."""
    P = (len(weights) - 1) // 2
    if extend == "periodic" and 2 * P + 1 > values.shape[-1]:
        # fold the kernel onto one period so every periodic image is counted once
        n = values.shape[-1]
        folded = np.zeros(n)
        np.add.at(folded, np.arange(-P, P + 1) % n, weights)
        weights = _centred(folded)
        P = (len(weights) - 1) // 2
    padded = _pad(values, P, extend)
    if padded.ndim == 1:
        return np.convolve(padded, weights, mode="valid")
    flat = padded.reshape(-1, padded.shape[-1])
    out = np.empty((flat.shape[0], values.shape[-1]))
    for r, row in enumerate(flat):
        out[r] = np.convolve(row, weights, mode="valid")
    return out.reshape(values.shape)


def _centred(folded: np.ndarray) -> np.ndarray:
    """Rearrange weights indexed by m mod n into an odd-length array centred at m = 0."""
    n = len(folded)
    half = n // 2
    idx = np.arange(-half, half + 1) % n
    w = folded[idx]
    if n % 2 == 0:
        # m = -half and m = +half are the same residue; split it between both ends
        w = w.copy()
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


def semigroup_values(values: np.ndarray, dx: float, t: float, k: int = 0, extend: str = "constant") -> np.ndarray:
    """d^k P_t applied along the last axis of raw grid values."""
    return convolve_rows(np.asarray(values, dtype=float), conv_weights(float(t), int(k), float(dx)), extend)


def semigroup_apply(f: GridPath, t: float, k: int = 0, extend: str = "constant") -> GridPath:
    """Grid values of d^k/dx^k P_t f, with f continued outside its grid according to ``extend``.

    For sqrt(t) >= 1.5 dx this is the trapezoid convolution, which is spectrally accurate on
    smooth data.  Below that scale the result is exact for the piecewise-linear interpolant,
    so smooth data carry an O(dx^2) interpolation error there.
    """
    if f.values.ndim != 1:
        raise DomainError("semigroup_apply expects a scalar path")
    return f.with_values(semigroup_values(f.values, f.dx, t, k, extend))


def time_singular_integral(g, t: float, T: float, power: float = 0.5, nodes: int = 257):
    """Integral of g over [t, T] where g(s) may blow up like (s - t)^(-power) at s = t.

    Substitutes s - t = u^m (m = 2, or 1/(1-power) for power > 1/2 so that the integrand in u
    stays bounded) and applies composite Simpson in u.  The integrand at u = 0 is never
    evaluated: it is 0 when the substituted integrand vanishes there and is otherwise
    extrapolated from the first three nodes.  ``g`` may return scalars, arrays or GridPaths.
    """
    if power >= 1:
        raise DomainError("power must be < 1 for an integrable singularity")
    if T < t:
        raise DomainError("need t <= T")
    if nodes < 5:
        raise DomainError("need at least 5 nodes")
    if nodes % 2 == 0:
        nodes += 1
    m = 2.0 if power <= 0.5 else 1.0 / (1.0 - power)
    vanishing = m * (1 - power) - 1 > 1e-12
    if T == t:
        probe = g(t + 1e-12 * max(1.0, abs(t)))
        if isinstance(probe, GridPath):
            return probe.with_values(np.zeros_like(probe.values))
        return 0.0 if np.ndim(probe) == 0 else np.zeros_like(np.asarray(probe, dtype=float))
    template = None
    U = (T - t) ** (1 / m)
    u = np.linspace(0.0, U, nodes)
    vals = []
    for ui in u[1:]:
        gi = g(t + ui**m)
        if isinstance(gi, GridPath):
            template = gi
            gi = gi.values
        vals.append(m * ui ** (m - 1) * np.asarray(gi, dtype=float))
    h0 = np.zeros_like(vals[0]) if vanishing else 3 * vals[0] - 3 * vals[1] + vals[2]
    vals = np.stack([h0] + vals)
    w = np.ones(nodes)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    du = U / (nodes - 1)
    total = np.tensordot(w, vals, axes=(0, 0)) * du / 3
    if isinstance(template, GridPath):
        return template.with_values(total)
    return float(total) if np.ndim(total) == 0 else total


@dataclass(frozen=True)
class Mollifier:
    level: int
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise DomainError("only the Gaussian mollifier is available")
        if int(self.level) < 1:
            raise DomainError("mollifier level must be a positive integer")


def mollifier_weights(level: int, dx: float) -> np.ndarray:
    """Grid weights of n rho(n x) with rho the standard Gaussian, renormalised to sum 1."""
    w = np.array(conv_weights(1.0 / level**2, 0, dx))
    return w / w.sum()


def mollify(Y: TimeSpaceField, m: Mollifier | int, extend: str = "constant") -> TimeSpaceField:
    """Convolve every time slice with n rho(n .)."""
    level = m.level if isinstance(m, Mollifier) else int(m)
    Mollifier(level)
    w = mollifier_weights(level, Y.dx)
    vals = Y.values
    if vals.ndim == 3:
        moved = np.moveaxis(vals, 2, 1)
        out = np.moveaxis(convolve_rows(moved, w, extend), 1, 2)
    else:
        out = convolve_rows(vals, w, extend)
    return Y.with_values(out)


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1 - s, 1.0)), 0.0)
    return a / (a + b)


def cutoff(x, N: float) -> np.ndarray:
    """Smooth cutoff equal to 1 on [-N, N] and 0 outside [-2N, 2N]."""
    return _smooth_step((2 * N - np.abs(np.asarray(x, dtype=float))) / N)


def truncate_derivatives(Y: TimeSpaceField, N: float) -> TimeSpaceField:
    """Y^N_t(x) = Y_t(0) + int_0^x phi^N(y) dY_t(y), which has bounded derivatives on the line."""
    if N < 1:
        raise DomainError("truncation level must be at least 1")
    x = Y.x
    centre = int(round(-Y.x0 / Y.dx))
    if centre < 0 or centre > Y.M or abs(x[centre]) > 1e-9 * Y.dx:
        raise DomainError("truncate_derivatives needs a grid point at 0")
    vals = Y.values if Y.values.ndim == 2 else Y.values[..., 0]
    phi = cutoff(0.5 * (x[1:] + x[:-1]), N)
    inc = np.diff(vals, axis=1) * phi
    prim = np.concatenate([np.zeros((vals.shape[0], 1)), np.cumsum(inc, axis=1)], axis=1)
    out = prim - prim[:, [centre]] + vals[:, [centre]]
    return Y.with_values(out)


@lru_cache(maxsize=4096)
def interval_weights(m: int, dt: float, dx: float, k: int = 0, nodes: int = 8) -> np.ndarray:
    """Weights of the operator int_{m dt}^{(m+1) dt} d^k P_tau dtau.

    Gauss-Legendre in tau for m >= 1; on the first interval tau = u^2 dt with Gauss-Legendre in
    u, which absorbs the tau -> 0 concentration of the kernel.
    """
    g, gw = np.polynomial.legendre.leggauss(nodes)
    if m == 0:
        u = 0.5 * (g + 1)
        taus = u * u * dt
        jac = 0.5 * gw * 2 * u * dt
    else:
        taus = (m + 0.5 * (g + 1)) * dt
        jac = 0.5 * gw * dt
    parts = [conv_weights(float(tau), k, dx) for tau in taus]
    P = max((len(w) - 1) // 2 for w in parts)
    out = np.zeros(2 * P + 1)
    for w, c in zip(parts, jac):
        q = (len(w) - 1) // 2
        out[P - q : P + q + 1] += c * w
    out.setflags(write=False)
    return out


def heat_time_transform(F: np.ndarray, dt: float, dx: float, extend: str = "constant") -> np.ndarray:
    """Grid version of t_k -> int_{t_k}^T d^2 P_{s - t_k} F_s ds for F linear in time between rows.

    ``F`` has shape (N+1, M+1), row k holding F at t_k = t_0 + k dt with T = t_N.  Integration by
    parts in time, with (1/2) d^2 P = d/dtau P, gives
    2 (P_{T - t_k} F_N - F_k) - 2 sum_{j >= k} [int_{t_j - t_k}^{t_{j+1} - t_k} P_tau dtau] (F_{j+1} - F_j) / dt,
    so no singular integrand is ever evaluated.  Spatial increments F_s(y) - F_s(x) are implicit:
    constants are annihilated by d^2.
    """
    F = np.asarray(F, dtype=float)
    N = F.shape[0] - 1
    out = np.zeros_like(F)
    if N == 0:
        return out
    rates = np.diff(F, axis=0) / dt
    for k in range(N):
        out[k] = 2 * (semigroup_values(F[N], dx, (N - k) * dt, 0, extend) - F[k])
    for m in range(N):
        w = interval_weights(m, float(dt), float(dx), 0)
        rows = rates[m:]                      # rate on interval k + m for k = 0..N-1-m
        out[: N - m] -= 2 * convolve_rows(rows, w, extend)
    return out


def heat_time_integral(F: np.ndarray, dt: float, dx: float, k: int = 1, extend: str = "constant") -> np.ndarray:
    """Grid version of t_k -> int_{t_k}^T d^k P_{s - t_k} F_s ds with F linear in time between rows.

    Each time interval is integrated with Gauss-Legendre nodes in tau (square-root substitution
    on the first one); F is interpolated linearly inside the interval.
    """
    F = np.asarray(F, dtype=float)
    N = F.shape[0] - 1
    out = np.zeros_like(F)
    if N == 0:
        return out
    g, gw = np.polynomial.legendre.leggauss(8)
    for m in range(N):
        if m == 0:
            u = 0.5 * (g + 1)
            theta, jac = u * u, 0.5 * gw * 2 * u * dt
        else:
            theta, jac = 0.5 * (g + 1), 0.5 * gw * dt
        lo, hi = F[m:N], F[m + 1 : N + 1]
        for th, c in zip(theta, jac):
            w = conv_weights(float((m + th) * dt), k, float(dx))
            out[: N - m] += c * convolve_rows((1 - th) * lo + th * hi, w, extend)
    return out
