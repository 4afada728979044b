"""Rough paths over a space grid, controlled integrands and compensated Riemann sums."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IntegrityError
from .holder import GridPath, TwoParamField, holder_seminorm, two_param_norm


def _columns(p: GridPath) -> np.ndarray:
    return p.values[:, None] if p.values.ndim == 1 else p.values


def _same_grid(a, b) -> bool:
    return a.M == b.M and abs(a.x0 - b.x0) <= 1e-12 * max(1, abs(a.x0)) and abs(a.dx - b.dx) <= 1e-12 * a.dx


def _index(grid, x) -> int:
    i = int(round((x - grid.x0) / grid.dx))
    if i < 0 or i > grid.M or abs(grid.x0 + i * grid.dx - x) > 1e-6 * grid.dx:
        raise DomainError(f"{x} is not a grid point")
    return i


def chen_anchor_defect(W: np.ndarray, WW: np.ndarray) -> float:
    """Largest Chen defect over triples (x_0, y, z); zero for all of them forces zero for every triple."""
    dW0 = W - W[0]
    left = WW[0][None, :, :, :] - WW[0][:, None, :, :] - WW
    right = np.einsum("ya,yzb->yzab", dW0, W[None, :, :] - W[:, None, :])
    return float(np.abs(left - right).max())


@dataclass(frozen=True)
class RoughPath:
    """A path W in R^n on a grid with its second-order increments WW(x, y) in R^{n x n}."""

    W: GridPath
    WW: TwoParamField
    alpha: float = 0.45
    check: bool = True

    def __post_init__(self):
        if not 1 / 3 < self.alpha <= 1:
            raise DomainError("alpha must lie in (1/3, 1]")
        if not _same_grid(self.W, self.WW):
            raise DomainError("W and WW must share a grid")
        n = self.n
        if self.WW.values.shape[2:] not in ((n, n),) and not (n == 1 and self.WW.values.ndim == 2):
            raise DomainError("WW must carry n x n components")
        if self.check:
            scale = max(1.0, float(np.abs(self.W.values).max()) ** 2, float(np.abs(self.WW.values).max()))
            defect = chen_anchor_defect(self.Wc, self.WWc)
            if defect > 1e-10 * scale:
                raise IntegrityError(f"Chen relation fails: defect {defect:.3e}")

    @property
    def n(self) -> int:
        return self.W.n_components

    @property
    def Wc(self) -> np.ndarray:
        return _columns(self.W)

    @property
    def WWc(self) -> np.ndarray:
        v = self.WW.values
        return v[:, :, None, None] if v.ndim == 2 else v

    def index(self, x) -> int:
        return _index(self.W, x)


@dataclass(frozen=True)
class ControlledPath:
    """An integrand v with Gubinelli derivative dWv (one column per component of W)."""

    v: GridPath
    dWv: GridPath
    beta: float = 0.4

    def __post_init__(self):
        if self.v.values.ndim != 1:
            raise DomainError("v must be scalar")
        if not _same_grid(self.v, self.dWv):
            raise DomainError("v and dWv must share a grid")
        if not 1 / 3 < self.beta <= 1:
            raise DomainError("beta must lie in (1/3, 1]")

    @property
    def dWc(self) -> np.ndarray:
        return _columns(self.dWv)


def make_iterated_integral(W: GridPath) -> TwoParamField:
    """WW(x, y) = int_x^y (W(z) - W(x)) (x) dW(z), exact for the piecewise-linear interpolant.

    Cell contributions use the trapezoid value of the integrand, so increments over adjacent
    intervals add up exactly and the Chen relation holds to rounding.
    """
    Wc = _columns(W)
    mid = 0.5 * (Wc[1:] + Wc[:-1])
    cells = np.einsum("ka,kb->kab", mid, np.diff(Wc, axis=0))
    C = np.concatenate([np.zeros((1,) + cells.shape[1:]), np.cumsum(cells, axis=0)])
    WW = primitive_to_two_param(C, Wc)
    if W.values.ndim == 1:
        WW = WW[:, :, 0, 0]
    return TwoParamField(W.x0, W.dx, WW)


def primitive_to_two_param(C: np.ndarray, Wc: np.ndarray) -> np.ndarray:
    """WW(i, j) = C(j) - C(i) - W(i) (x) (W(j) - W(i)) for a primitive C of int W (x) dW."""
    dW = Wc[None, :, :] - Wc[:, None, :]
    out = C[None, :] - C[:, None] - np.einsum("ia,ijb->ijab", Wc, dW)
    idx = np.arange(len(Wc))
    out[idx, idx] = 0.0
    return out


def chen_defect(R: RoughPath, x, y, z) -> np.ndarray:
    """WW(x,z) - WW(x,y) - WW(y,z) - (W(y)-W(x)) (x) (W(z)-W(y)) at grid points x <= y <= z."""
    if not x <= y <= z:
        raise DomainError("chen_defect needs x <= y <= z")
    i, j, k = (R.index(p) for p in (x, y, z))
    W, WW = R.Wc, R.WWc
    return WW[i, k] - WW[i, j] - WW[j, k] - np.outer(W[j] - W[i], W[k] - W[j])


def max_chen_defect(R: RoughPath, full: bool = False) -> float:
    """Largest Chen defect; ``full`` scans every ordered triple, otherwise the anchored scan."""
    W, WW = R.Wc, R.WWc
    if not full:
        return chen_anchor_defect(W, WW)
    best = 0.0
    n = len(W)
    for i in range(n):
        a = WW[i][None, :] - WW[i][:, None] - WW
        b = np.einsum("ya,yzb->yzab", W - W[i], W[None, :] - W[:, None])
        d = np.abs(a - b)
        mask = np.triu(np.ones((n, n), dtype=bool))
        mask[:i] = False
        best = max(best, float(d[mask].max()))
    return best


def remainder_field(v: ControlledPath, R: RoughPath) -> TwoParamField:
    """R^v(x, y) = v(y) - v(x) - dWv(x) . (W(y) - W(x)) on all grid pairs."""
    if not _same_grid(v.v, R.W):
        raise DomainError("controlled path and rough path must share a grid")
    vals = v.v.values
    dW = R.Wc[None, :, :] - R.Wc[:, None, :]
    out = vals[None, :] - vals[:, None] - np.einsum("ia,ija->ij", v.dWc, dW)
    np.fill_diagonal(out, 0.0)
    return TwoParamField(R.W.x0, R.W.dx, out)


def compensated_sum(v: ControlledPath, R: RoughPath, idx) -> np.ndarray:
    """S = sum_i v(x_i)(W(x_{i+1}) - W(x_i)) + dWv(x_i) WW(x_i, x_{i+1}) along grid indices ``idx``."""
    idx = np.asarray(idx)
    a, b = idx[:-1], idx[1:]
    W, WW = R.Wc, R.WWc
    first = v.v.values[a, None] * (W[b] - W[a])
    second = np.einsum("ka,kab->kb", v.dWc[a], WW[a, b])
    return (first + second).sum(axis=0)


def cumulative_compensated(v: ControlledPath, R: RoughPath) -> np.ndarray:
    """Finest-grid integral from the left end to every grid point, shape (M+1, n)."""
    W, WW = R.Wc, R.WWc
    k = np.arange(R.W.M)
    cells = v.v.values[:-1, None] * np.diff(W, axis=0) + np.einsum("ka,kab->kb", v.dWc[:-1], WW[k, k + 1])
    return np.concatenate([np.zeros((1, W.shape[1])), np.cumsum(cells, axis=0)])


@dataclass
class IntegralReport:
    value: np.ndarray
    meshes: list = field(default_factory=list)
    values: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    slope: float = float("nan")
    partition_value: np.ndarray | None = None


def _slope(h, err) -> float:
    h, err = np.asarray(h, float), np.asarray(err, float)
    keep = err > 1e-14 * max(1.0, err.max(initial=0.0))
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[keep]), np.log(err[keep]), 1)[0])


def rough_integral(v: ControlledPath, R: RoughPath, x, y, partition=None, levels: int = 5) -> IntegralReport:
    """Integral of v against W over [x, y] as the finest-grid compensated sum.

    The report lists sums over dyadically coarsened partitions (every 2^l grid points, which
    must divide the number of cells for the coarsest levels to hit y) with their distance
    to the finest value and the fitted log-log slope.  If ``partition`` (grid points) is given
    its sum is reported as ``partition_value``.
    """
    i, j = R.index(x), R.index(y)
    if j < i:
        raise DomainError("need x <= y")
    finest = compensated_sum(v, R, np.arange(i, j + 1)) if j > i else np.zeros(R.n)
    rep = IntegralReport(value=finest)
    if partition is not None:
        pidx = sorted(R.index(p) for p in partition)
        if pidx and (pidx[0] < i or pidx[-1] > j):
            raise DomainError("partition must lie within [x, y]")
        pidx = sorted(set([i] + pidx + [j]))
        rep.partition_value = compensated_sum(v, R, pidx)
    for lev in range(1, levels + 1):
        step = 2**lev
        if step > j - i:
            break
        idx = np.arange(i, j + 1, step)
        if idx[-1] != j:
            idx = np.append(idx, j)
        s = compensated_sum(v, R, idx)
        rep.meshes.append(step * R.W.dx)
        rep.values.append(s)
        rep.errors.append(float(np.linalg.norm(s - finest)))
    rep.slope = _slope(rep.meshes, rep.errors)
    return rep


@dataclass
class YoungReport:
    value: float
    left_point: float
    constant: float
    alpha: float
    alpha_prime: float


def young_integral(f: GridPath, g: GridPath, x=None, y=None, alpha: float = 1.0, alpha_prime: float = 1.0,
                   with_constant: bool = True) -> YoungReport:
    """Riemann-Stieltjes integral of f against g on the finest grid.

    ``value`` integrates the piecewise-linear interpolants (average of the endpoint values of f
    on each cell); ``left_point`` is the plain left-point sum.  Both converge to the same limit
    when the Hölder exponents add up to more than one.  ``constant`` is the smallest c with
    |S(x_i, x_j) - f(x_i)(g(x_j) - g(x_i))| <= c ||f||_{alpha'} ||g||_alpha |x_j - x_i|^{alpha + alpha'}
    over all grid sub-intervals.
    """
    if f.values.ndim != 1 or g.values.ndim != 1 or not _same_grid(f, g):
        raise DomainError("young_integral needs scalar paths on a shared grid")
    i = 0 if x is None else _index(f, x)
    j = f.M if y is None else _index(f, y)
    fv, gv = f.values[i : j + 1], g.values[i : j + 1]
    dg = np.diff(gv)
    value = float(np.sum(0.5 * (fv[1:] + fv[:-1]) * dg))
    left = float(np.sum(fv[:-1] * dg))
    const = float("nan")
    if with_constant and j > i:
        C = np.concatenate([[0.0], np.cumsum(0.5 * (fv[1:] + fv[:-1]) * dg)])
        nf = holder_seminorm(f.restrict((f.x0 + i * f.dx, f.x0 + j * f.dx)), alpha_prime)
        ng = holder_seminorm(g.restrict((g.x0 + i * g.dx, g.x0 + j * g.dx)), alpha)
        best = 0.0
        n = len(fv)
        for lag in range(1, n):
            err = np.abs(C[lag:] - C[:-lag] - fv[:-lag] * (gv[lag:] - gv[:-lag]))
            best = max(best, err.max() / (lag * f.dx) ** (alpha + alpha_prime))
        const = best / (nf * ng) if nf * ng > 0 else (0.0 if best == 0 else float("inf"))
    return YoungReport(value, left, const, alpha, alpha_prime)


@dataclass
class BoundReport:
    meshes: list
    ratios: list
    constant: float
    passed: bool


def integral_error_bound_check(v: ControlledPath, R: RoughPath, x, y, levels: int = 4) -> BoundReport:
    """Compare local errors of one-step compensated sums with the a-priori bound shape.

    For partitions with mesh h = 2^l dx the largest |S_fine - S_one_step| over cells is divided
    by ||WW||_{2a} ||dWv||_b h^{2a+b} + ||W||_a ||R^v||_{2b'} h^{a+2b'}.  The check passes when the
    ratio does not grow by more than a factor 4 from the coarsest to any finer level.
    """
    i, j = R.index(x), R.index(y)
    a, b = R.alpha, v.beta
    bp = min(b, 0.5)
    sub = (R.W.x0 + i * R.W.dx, R.W.x0 + j * R.W.dx)
    nWW = two_param_norm(R.WW, 2 * a, sub)
    nW = holder_seminorm(R.W, a, sub)
    ndv = holder_seminorm(v.dWv, b, sub)
    nR = two_param_norm(remainder_field(v, R), 2 * bp, sub)
    prim = cumulative_compensated(v, R)
    W, WW = R.Wc, R.WWc
    meshes, ratios = [], []
    for lev in range(levels, 0, -1):
        step = 2**lev
        idx = np.arange(i, j + 1, step)
        if len(idx) < 2:
            continue
        s, e = idx[:-1], idx[1:]
        one = v.v.values[s, None] * (W[e] - W[s]) + np.einsum("ka,kab->kb", v.dWc[s], WW[s, e])
        err = np.linalg.norm(prim[e] - prim[s] - one, axis=1).max()
        h = step * R.W.dx
        bound = nWW * ndv * h ** (2 * a + b) + nW * nR * h ** (a + 2 * bp)
        meshes.append(h)
        ratios.append(0.0 if err <= 1e-13 else (err / bound if bound > 0 else float("inf")))
    constant = max(ratios) if ratios else 0.0
    passed = bool(ratios) and all(np.isfinite(ratios)) and max(ratios) <= 4 * ratios[0] + 1e-12
    return BoundReport(meshes, ratios, constant, passed)
