"""Grid containers for paths and two-parameter fields, and the Hölder-type norms on them."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError


def _as_float_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 0:
        raise DomainError("values must be at least one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DomainError("values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridPath:
    """Samples of a function of x on the uniform grid ``x0 + i*dx``, ``i = 0..M``.

    ``values`` has shape ``(M+1,)`` for scalar paths or ``(M+1, n)`` for paths in R^n.
    """

    x0: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        if not self.dx > 0:
            raise DomainError(f"dx must be positive, got {self.dx}")
        vals = _as_float_array(self.values)
        if vals.ndim > 2 or vals.shape[0] < 2:
            raise DomainError("a GridPath needs at least two grid points")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "dx", float(self.dx))

    @classmethod
    def from_function(cls, func, x0: float, x1: float, M: int) -> "GridPath":
        x = np.linspace(x0, x1, M + 1)
        return cls(x0, (x1 - x0) / M, np.asarray(func(x), dtype=float))

    @classmethod
    def symmetric(cls, values, a: float) -> "GridPath":
        values = np.asarray(values, dtype=float)
        return cls(-a, 2 * a / (values.shape[0] - 1), values)

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n_components(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.M + 1)

    @property
    def x1(self) -> float:
        return self.x0 + self.M * self.dx

    def with_values(self, values) -> "GridPath":
        return GridPath(self.x0, self.dx, values)

    def index_range(self, sub=None) -> tuple[int, int]:
        """Inclusive index range of the grid points lying in ``sub = (a, b)``."""
        if sub is None:
            return 0, self.M
        a, b = sub
        tol = 1e-9 * self.dx
        if a < self.x0 - tol or b > self.x1 + tol or not b > a:
            raise DomainError(f"interval {sub} is not inside [{self.x0}, {self.x1}]")
        i = int(np.ceil((a - self.x0) / self.dx - 1e-9))
        j = int(np.floor((b - self.x0) / self.dx + 1e-9))
        if j - i < 1:
            raise DomainError(f"interval {sub} contains fewer than two grid points")
        return i, j

    def restrict(self, sub) -> "GridPath":
        i, j = self.index_range(sub)
        return GridPath(self.x0 + i * self.dx, self.dx, self.values[i : j + 1])

    def __call__(self, x) -> np.ndarray:
        """Linear interpolation, constant continuation outside the grid."""
        if self.values.ndim == 1:
            return np.interp(x, self.x, self.values)
        return np.stack([np.interp(x, self.x, self.values[:, c]) for c in range(self.n_components)], axis=-1)

    def to_csv(self, path) -> None:
        write_csv(path, ["x"], self.x[:, None], self.values)

    @classmethod
    def read_csv(cls, path) -> "GridPath":
        header, data = _read_csv(path)
        if header[0] != "x":
            raise DomainError(f"expected first column 'x' in {path}")
        x = data[:, 0]
        vals = data[:, 1] if data.shape[1] == 2 else data[:, 1:]
        dx = (x[-1] - x[0]) / (len(x) - 1)
        return cls(x[0], dx, vals)


@dataclass(frozen=True)
class TimeSpaceField:
    """Samples of f_t(x) on a uniform time grid times a uniform space grid.

    ``values`` has shape ``(N+1, M+1)`` or ``(N+1, M+1, n)``.
    """

    t0: float
    dt: float
    x0: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        if not self.dx > 0:
            raise DomainError("dx must be positive")
        vals = _as_float_array(self.values)
        if vals.ndim == 1 or vals.ndim > 3 or vals.shape[1] < 2:
            raise DomainError("a TimeSpaceField needs shape (times, space[, components])")
        if vals.shape[0] > 1 and not self.dt > 0:
            raise DomainError("dt must be positive")
        object.__setattr__(self, "values", vals)
        for name in ("t0", "dt", "x0", "dx"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def M(self) -> int:
        return self.values.shape[1] - 1

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.N + 1)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.M + 1)

    @property
    def T(self) -> float:
        return self.t0 + self.N * self.dt

    def slice(self, k: int) -> GridPath:
        return GridPath(self.x0, self.dx, self.values[k])

    def with_values(self, values) -> "TimeSpaceField":
        return TimeSpaceField(self.t0, self.dt, self.x0, self.dx, values)

    def at_time(self, t: float) -> np.ndarray:
        """Values at time ``t`` by linear interpolation between slices."""
        if self.N == 0:
            return self.values[0]
        s = (t - self.t0) / self.dt
        if s < -1e-9 or s > self.N + 1e-9:
            raise DomainError(f"time {t} outside [{self.t0}, {self.T}]")
        k = min(max(int(np.floor(s)), 0), self.N - 1)
        w = min(max(s - k, 0.0), 1.0)
        return (1 - w) * self.values[k] + w * self.values[k + 1]

    def to_csv(self, path) -> None:
        tt, xx = np.meshgrid(self.t, self.x, indexing="ij")
        keys = np.column_stack([tt.ravel(), xx.ravel()])
        n = self.values.shape[0] * self.values.shape[1]
        write_csv(path, ["t", "x"], keys, self.values.reshape(n, -1))

    @classmethod
    def read_csv(cls, path) -> "TimeSpaceField":
        header, data = _read_csv(path)
        if header[:2] != ["t", "x"]:
            raise DomainError(f"expected leading columns 't,x' in {path}")
        t = np.unique(data[:, 0])
        x = np.unique(data[:, 1])
        vals = data[:, 2:].reshape(len(t), len(x), -1)
        if vals.shape[2] == 1:
            vals = vals[..., 0]
        dt = (t[-1] - t[0]) / (len(t) - 1) if len(t) > 1 else 1.0
        return cls(t[0], dt, x[0], (x[-1] - x[0]) / (len(x) - 1), vals)


@dataclass(frozen=True)
class TwoParamField:
    """Values R(x_i, x_j) on all grid pairs; shape ``(M+1, M+1)`` plus optional component axes."""

    x0: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        vals = _as_float_array(self.values)
        if vals.ndim < 2 or vals.shape[0] != vals.shape[1]:
            raise DomainError("a TwoParamField needs a square array over grid pairs")
        diag = np.abs(vals[np.arange(vals.shape[0]), np.arange(vals.shape[0])])
        if diag.size and diag.max() > 1e-12:
            raise DomainError("a TwoParamField must vanish on the diagonal")
        object.__setattr__(self, "values", vals)

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.M + 1)

    @classmethod
    def from_function(cls, func, x0: float, x1: float, M: int) -> "TwoParamField":
        x = np.linspace(x0, x1, M + 1)
        return cls(x0, (x1 - x0) / M, func(x[:, None], x[None, :]))

    def layout(self) -> GridPath:
        return GridPath(self.x0, self.dx, np.zeros(self.M + 1))


@dataclass(frozen=True)
class HolderParams:
    alpha: float = 0.45
    beta: float = 0.43
    chi: float = 0.1
    theta: float = 1.0
    lam: float = 1.0
    beta_prime: float = field(init=False)

    def __post_init__(self):
        for name in ("alpha", "beta"):
            val = getattr(self, name)
            if not 1 / 3 < val <= 1:
                raise DomainError(f"{name} must lie in (1/3, 1], got {val}")
        if not self.chi > 0:
            raise DomainError("chi must be positive")
        if self.theta < 1 or self.lam < 1:
            raise DomainError("theta and lambda must be at least 1")
        object.__setattr__(self, "beta_prime", min(self.beta, 0.5))

    def check_controlled(self):
        if not self.beta < self.alpha:
            raise DomainError("controlled integration needs beta < alpha")
        if not self.beta > 2 * self.chi:
            raise DomainError("the PDE theory needs beta > 2 chi")


# ---------------------------------------------------------------- CSV helpers

def write_csv(path, key_names, keys, values) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = ["value"] if values.shape[1] == 1 else [f"v{c}" for c in range(values.shape[1])]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(key_names) + names)
        for k, v in zip(keys, values):
            w.writerow([repr(float(a)) for a in k] + [repr(float(a)) for a in v])


def _read_csv(path):
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise DomainError(f"{path} holds fewer than two data rows")
    return [h.strip() for h in rows[0]], np.array(rows[1:], dtype=float)


# ---------------------------------------------------------------- norms

def _norm_last(diff: np.ndarray) -> np.ndarray:
    if diff.ndim == 1:
        return np.abs(diff)
    return np.sqrt(np.sum(diff.reshape(diff.shape[0], -1) ** 2, axis=1))


def holder_seminorm(f: GridPath, alpha: float, sub=None) -> float:
    """Largest |f(y) - f(x)| / |y - x|^alpha over grid pairs in ``sub``."""
    i, j = f.index_range(sub)
    vals = f.values[i : j + 1]
    best = 0.0
    for lag in range(1, vals.shape[0]):
        inc = _norm_last(vals[lag:] - vals[:-lag])
        best = max(best, inc.max() / (lag * f.dx) ** alpha)
    return best


def weighted_norm(f: GridPath, alpha: float) -> float:
    """Sup norm plus the Hölder seminorm damped by (1 v max|x|)^(-alpha/2)."""
    sup = _norm_last(f.values).max()
    radius = max(1.0, abs(f.x0), abs(f.x1))
    return float(sup + radius ** (-alpha / 2) * holder_seminorm(f, alpha))


def two_param_norm(R: TwoParamField, gamma: float, sub=None) -> float:
    """Largest |R(x, y)| / |y - x|^gamma over grid pairs x != y in ``sub``."""
    i, j = R.layout().index_range(sub)
    vals = R.values[i : j + 1, i : j + 1]
    n = vals.shape[0]
    best = 0.0
    for lag in range(1, n):
        idx = np.arange(n - lag)
        pair = np.concatenate([vals[idx, idx + lag], vals[idx + lag, idx]])
        best = max(best, _norm_last(pair).max() / (lag * R.dx) ** gamma)
    return best


def _ratio_by_radius(vals: np.ndarray, dx: float, centre: int, power: float, two_param: bool) -> np.ndarray:
    """For each radius index r, the largest ratio over pairs whose farther point sits at radius r."""
    n = vals.shape[0]
    out = np.zeros(n)
    radius_of = np.abs(np.arange(n) - centre)
    for lag in range(1, n):
        lo = np.arange(n - lag)
        hi = lo + lag
        if two_param:
            num = _norm_last(np.concatenate([vals[lo, hi], vals[hi, lo]]))
            rad = np.concatenate([np.maximum(radius_of[lo], radius_of[hi])] * 2)
        else:
            num = _norm_last(vals[hi] - vals[lo])
            rad = np.maximum(radius_of[lo], radius_of[hi])
        np.maximum.at(out, rad, num / (lag * dx) ** power)
    return out


def kappa_growth(W: GridPath, WW: TwoParamField, alpha: float, chi: float) -> float:
    """Growth functional: sup over windows [-a, a], a >= 1, of ||W||_alpha / a^chi + ||WW||_{2 alpha} / a^{2 chi}."""
    if W.M != WW.M or abs(W.x0 - WW.x0) > 1e-12 or abs(W.dx - WW.dx) > 1e-12:
        raise DomainError("W and WW must share a grid")
    centre = int(round(-W.x0 / W.dx))
    if abs(W.x0 + centre * W.dx) > 1e-9 * W.dx or centre != W.M - centre:
        raise DomainError("kappa_growth needs a grid symmetric about 0")
    if centre * W.dx < 1 - 1e-12:
        raise DomainError("grid radius must be at least 1")
    first = np.maximum.accumulate(_ratio_by_radius(W.values, W.dx, centre, alpha, False))
    second = np.maximum.accumulate(_ratio_by_radius(WW.values, WW.dx, centre, 2 * alpha, True))
    radii = np.arange(centre + 1) * W.dx
    keep = radii >= 1 - 1e-12
    a = radii[keep]
    return float(np.max(first[: centre + 1][keep] / a**chi + second[: centre + 1][keep] / a ** (2 * chi)))


def time_space_holder(f: TimeSpaceField, gamma: float, alpha: float, window=None) -> float:
    """Largest |f_t(y) - f_s(x)| / (|t - s|^gamma + |y - x|^alpha) over distinct grid points.

    ``window`` is ``((s0, s1), (a, b))`` or ``None`` for the whole field.
    """
    vals = f.values
    if vals.ndim == 3:
        vals = vals.reshape(vals.shape[0], vals.shape[1], -1)
    if window is not None:
        (s0, s1), sub = window
        k0 = int(np.ceil((s0 - f.t0) / f.dt - 1e-9)) if f.N else 0
        k1 = int(np.floor((s1 - f.t0) / f.dt + 1e-9)) if f.N else 0
        if k0 < 0 or k1 > f.N or k1 < k0:
            raise DomainError(f"time window {(s0, s1)} not inside the field")
        i, j = f.slice(0).index_range(sub)
        vals = vals[k0 : k1 + 1, i : j + 1]
    nt, nx = vals.shape[:2]
    if nt * nx < 2:
        raise DomainError("window must contain two distinct grid points")
    best = 0.0
    for lt in range(nt):
        for lx in range(-(nx - 1), nx):
            if lt == 0 and lx <= 0:
                continue
            a = vals[lt:, max(lx, 0) : nx + min(lx, 0)]
            b = vals[: nt - lt, max(-lx, 0) : nx - max(lx, 0)]
            diff = np.abs(a - b) if a.ndim == 2 else np.sqrt(np.sum((a - b) ** 2, axis=-1))
            denom = (lt * f.dt) ** gamma if lt else 0.0
            denom += (abs(lx) * f.dx) ** alpha if lx else 0.0
            best = max(best, diff.max() / denom)
    return best


def holder_exponent_fit(f, scales=(1, 2, 4, 8, 16, 32, 64), axis: str = "x", mode: str = "block",
                        block: int = 4) -> float:
    """Slope of log(max increment at lag l) against log l.

    ``mode="max"`` uses the largest increment over the whole grid; it suits deterministic
    paths whose roughness sits at isolated points, and it carries the logarithmic excess of the
    modulus of continuity of random paths.  ``mode="block"`` (default) splits the non-overlapping
    increments at each lag into blocks of a fixed count (``block`` of them), averages the log of
    the block maxima and then averages over the lag offsets; the count of samples behind each
    maximum is the same at every lag, so extreme-value growth does not tilt the slope.  For a
    :class:`TimeSpaceField` the spatial fit (``axis="x"``) pools all time slices and the temporal
    fit (``axis="t"``) pools all space points.
    """
    scales = sorted(int(s) for s in scales)
    if len(scales) < 3:
        raise DomainError("holder_exponent_fit needs at least three scales")
    if scales[0] < 1:
        raise DomainError("scales are positive integer lags")
    if mode not in ("block", "max"):
        raise DomainError(f"unknown mode {mode!r}")
    if isinstance(f, GridPath):
        series = f.values[None, :] if f.values.ndim == 1 else f.values.T
    elif isinstance(f, TimeSpaceField):
        vals = f.values if f.values.ndim == 2 else f.values[..., 0]
        series = vals if axis == "x" else vals.T
    else:
        raise DomainError("holder_exponent_fit expects a GridPath or TimeSpaceField")
    n = series.shape[1] - 1
    span = scales[-1]
    if n < span:
        raise DomainError("largest scale exceeds the grid")
    block = max(1, min(block, n // span))
    logs = []
    for lag in scales:
        if mode == "max":
            logs.append(np.log(max(np.abs(series[:, lag:] - series[:, :-lag]).max(), 1e-300)))
            continue
        d = np.abs(series[:, lag:] - series[:, :-lag])
        per_offset = []
        for o in range(lag):
            inc = d[:, o::lag]
            nb = inc.shape[1] // block
            if nb == 0:
                continue
            mx = inc[:, : nb * block].reshape(series.shape[0], nb, block).max(axis=2)
            per_offset.append(np.mean(np.log(np.maximum(mx, 1e-300))))
        if not per_offset:
            raise DomainError("grid too short for the block estimator at the largest scale")
        logs.append(np.mean(per_offset))
    return float(np.polyfit(np.log(scales), logs, 1)[0])
