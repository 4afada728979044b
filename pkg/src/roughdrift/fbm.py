"""Exact fractional Brownian motion on a uniform grid by circulant embedding (Davies–Harte)."""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .holder import GridPath


def fgn_autocov(n: int, hurst: float) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags 0..n."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def circulant_eigenvalues(n: int, hurst: float) -> np.ndarray:
    g = fgn_autocov(n, hurst)
    row = np.concatenate([g, g[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise DomainError("circulant embedding is not non-negative definite")
    return np.clip(lam, 0.0, None)


def sample_fgn(n: int, hurst: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """n unit-step fGn increments (or ``size`` independent rows of them)."""
    if not 0 < hurst < 1:
        raise DomainError("Hurst index must lie in (0, 1)")
    if n < 1:
        raise DomainError("need at least one increment")
    lam = circulant_eigenvalues(n, hurst)
    m = lam.size
    rows = 1 if size is None else int(size)
    z = rng.standard_normal((rows, m)) + 1j * rng.standard_normal((rows, m))
    w = np.fft.fft(np.sqrt(lam / m) * z, axis=1)
    out = w.real[:, :n]
    return out[0] if size is None else out


def sample_fbm(n: int, hurst: float, length: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """fBm at the n+1 points k*length/n, started at 0."""
    inc = sample_fgn(n, hurst, rng, size) * (length / n) ** hurst
    zero = np.zeros(inc.shape[:-1] + (1,))
    return np.concatenate([zero, np.cumsum(inc, axis=-1)], axis=-1)


def fbm_path(a: float, M: int, hurst: float, seed: int) -> GridPath:
    """Two-sided fBm on [-a, a] (M cells, M even) pinned to 0 at the origin."""
    if M % 2:
        raise DomainError("M must be even so that 0 is a grid point")
    rng = np.random.default_rng(seed)
    path = sample_fbm(M, hurst, 2 * a, rng)
    return GridPath(-a, 2 * a / M, path - path[M // 2])
