"""A potential Y_t(x) on a space-time grid, with the operations the SDE and drift code need."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError
from .heat import mollify
from .holder import GridPath, TimeSpaceField


@dataclass(frozen=True)
class Environment:
    """Y sampled on a grid.

    ``extend`` says how Y continues past the space grid ("constant", "linear" or "periodic").
    A homogeneous environment has a single spatial profile and can be evaluated at any time.
    """

    Y: TimeSpaceField
    extend: str = "constant"
    homogeneous: bool = False
    level: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.extend not in ("constant", "linear", "periodic"):
            raise DomainError(f"unknown extension {self.extend!r}")
        if self.Y.values.ndim != 2:
            raise DomainError("environment must be scalar valued")

    @classmethod
    def from_function(cls, func, T0: float, nt: int, x0: float, x1: float, M: int, extend: str = "constant"):
        t = np.linspace(0.0, T0, nt + 1)
        x = np.linspace(x0, x1, M + 1)
        tt, xx = np.meshgrid(t, x, indexing="ij")
        vals = np.asarray(func(tt, xx), dtype=float) * np.ones_like(tt)
        return cls(TimeSpaceField(0.0, T0 / nt, x0, (x1 - x0) / M, vals), extend)

    @classmethod
    def from_profile(cls, profile: GridPath, T0: float = 1.0, extend: str = "constant"):
        """Time-independent environment Y_t = profile."""
        vals = np.vstack([profile.values, profile.values])
        return cls(TimeSpaceField(0.0, T0, profile.x0, profile.dx, vals), extend, homogeneous=True)

    @classmethod
    def zero(cls, T0: float = 1.0, a: float = 4.0, M: int = 256):
        return cls.from_profile(GridPath(-a, 2 * a / M, np.zeros(M + 1)), T0)

    @property
    def T0(self) -> float:
        return self.Y.T

    @property
    def x(self) -> np.ndarray:
        return self.Y.x

    @property
    def period(self) -> float | None:
        return (self.Y.M + 1) * self.Y.dx if self.extend == "periodic" else None

    def mollified(self, n: int) -> "Environment":
        return Environment(mollify(self.Y, n, self.extend), self.extend, self.homogeneous, int(n), self.meta)

    def profile(self, t: float) -> np.ndarray:
        if self.homogeneous:
            return self.Y.values[0]
        return self.Y.at_time(t)

    def window(self, t: float, T: float, steps: int | None = None, sub=None) -> TimeSpaceField:
        """Y on [t, T] with ``steps`` time intervals (linear in time between stored slices).

        ``sub`` restricts the space grid to an interval.
        """
        if not T > t:
            raise DomainError("window needs T > t")
        if not self.homogeneous and (t < self.Y.t0 - 1e-12 or T > self.Y.T + 1e-12):
            raise DomainError(f"[{t}, {T}] is outside the environment's time span")
        if steps is None:
            steps = int(round((T - t) / self.Y.dt)) if not self.homogeneous else 1
        steps = max(int(steps), 1)
        i, j = (0, self.Y.M) if sub is None else GridPath(self.Y.x0, self.Y.dx, self.Y.values[0]).index_range(sub)
        times = np.linspace(t, T, steps + 1)
        rows = np.stack([self.profile(s)[i : j + 1] for s in times])
        return TimeSpaceField(t, (T - t) / steps, self.Y.x0 + i * self.Y.dx, self.Y.dx, rows)

    @cached_property
    def gradient(self) -> np.ndarray:
        """Centred differences of Y in x on every stored slice (one-sided at a non-periodic edge)."""
        v = self.Y.values
        if self.extend == "periodic":
            return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * self.Y.dx)
        return np.gradient(v, self.Y.dx, axis=1)

    def drift_at(self, t: float, X: np.ndarray) -> np.ndarray:
        """d_x Y_t(X) by linear interpolation of the gradient in t and x."""
        D = self.gradient
        x = self.Y.x
        per = self.period
        if self.homogeneous or self.Y.N == 0:
            return np.interp(X, x, D[0], period=per)
        s = (t - self.Y.t0) / self.Y.dt
        k = min(max(int(np.floor(s + 1e-9)), 0), self.Y.N - 1)
        w = s - k
        out = np.interp(X, x, D[k], period=per)
        if w > 1e-12:
            out = (1 - w) * out + w * np.interp(X, x, D[k + 1], period=per)
        return out

    def inside(self, X: np.ndarray) -> np.ndarray:
        if self.extend == "periodic":
            return np.ones(np.shape(X), dtype=bool)
        return (X >= self.Y.x0) & (X <= self.Y.x0 + self.Y.M * self.Y.dx)
