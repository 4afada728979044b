"""Crank-Nicolson solver for the classical backward equation, used as an independent reference."""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def crank_nicolson(drift, uT, x: np.ndarray, T: float, n_steps: int, f=None, t_out=None):
    """Solve d_t u + u_xx / 2 + b(t, x) u_x = f(t, x), u(T) = uT on the grid ``x``.

    ``drift(t, x)``, ``uT(x)`` and ``f(t, x)`` are vectorised callables.  At the two boundary nodes
    u_xx is set to zero and u_x is taken one-sided, so affine terminal data are carried exactly.
    Returns the solution at the requested times ``t_out`` (default: every step) as an array
    (len(t_out), len(x)), together with the times.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    dx = x[1] - x[0]
    dt = T / n_steps
    times = T - dt * np.arange(n_steps + 1)          # backward in time
    u = np.asarray(uT(x), dtype=float).copy()
    wanted = None if t_out is None else np.asarray(t_out, dtype=float)
    saved = {}

    def record(step, vals):
        t = times[step]
        if wanted is None:
            saved[step] = vals.copy()
        else:
            hit = np.where(np.abs(wanted - t) < 1e-9 * max(1.0, T))[0]
            for h in hit:
                saved[int(h)] = vals.copy()

    def operator(t):
        b = drift(t, x) * np.ones(n)
        lo = np.zeros(n)
        di = np.zeros(n)
        up = np.zeros(n)
        lo[1:-1] = 0.5 / dx**2 - b[1:-1] / (2 * dx)
        di[1:-1] = -1.0 / dx**2
        up[1:-1] = 0.5 / dx**2 + b[1:-1] / (2 * dx)
        di[0], up[0] = -b[0] / dx, b[0] / dx
        lo[-1], di[-1] = -b[-1] / dx, b[-1] / dx
        return lo, di, up

    def apply(op, vals):
        lo, di, up = op
        out = di * vals
        out[1:] += lo[1:] * vals[:-1]
        out[:-1] += up[:-1] * vals[1:]
        return out

    src = (lambda t: np.zeros(n)) if f is None else (lambda t: f(t, x) * np.ones(n))
    record(0, u)
    op_old = operator(times[0])
    for step in range(1, n_steps + 1):
        op_new = operator(times[step])
        rhs = u + 0.5 * dt * apply(op_old, u) - 0.5 * dt * (src(times[step - 1]) + src(times[step]))
        ab = np.zeros((3, n))
        lo, di, up = op_new
        ab[0, 1:] = -0.5 * dt * up[:-1]
        ab[1] = 1 - 0.5 * dt * di
        ab[2, :-1] = -0.5 * dt * lo[1:]
        u = solve_banded((1, 1), ab, rhs)
        op_old = op_new
        record(step, u)
    if wanted is None:
        order = sorted(saved)
        return np.array([saved[s] for s in order]), times[order]
    return np.array([saved[i] for i in range(len(wanted))]), wanted
