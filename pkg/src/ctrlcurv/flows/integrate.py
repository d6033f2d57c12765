"""Explicit Runge-Kutta integrators: adaptive Dormand-Prince 5(4) and fixed-step RK4.

Both work on numpy state arrays of any shape.  The adaptive one keeps
statistics and lets the right-hand side abort the integration by raising
:class:`StopIntegration` (used to stop extremals where regularity is lost).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Dormand & Prince (1980) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class StopIntegration(Exception):
    """Raised by a right-hand side to end the integration early with a reason."""


class StepSizeUnderflow(ArithmeticError):
    pass


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    max_error: float = 0.0  # largest accepted local error estimate, in tolerance units


@dataclass
class OdeSolution:
    t: np.ndarray
    y: np.ndarray
    stats: IntegratorStats = field(default_factory=IntegratorStats)
    status: str = "ok"


def dopri5(rhs, t0, y0, t_end, rtol=1e-9, atol=1e-9, max_step=np.inf, first_step=None, min_step=1e-14,
           max_steps=100_000):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``; returns every accepted step."""
    y = np.array(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    stats = IntegratorStats()
    ts, ys = [t], [y.copy()]
    if span == 0:
        return OdeSolution(np.array(ts), np.array(ys), stats)

    def call(tt, yy):
        stats.rhs_evals += 1
        return np.asarray(rhs(tt, yy), dtype=float)

    try:
        k0 = call(t, y)
    except StopIntegration as exc:
        return OdeSolution(np.array(ts), np.array(ys), stats, f"stopped: {exc}")
    h = first_step or min(max_step, 0.01 * span, _initial_step(y, k0, rtol, atol))
    status = "ok"
    while direction * (t_end - t) > 0:
        if stats.steps + stats.rejected >= max_steps:
            status = "stopped: too many steps"
            break
        h = min(h, max_step, abs(t_end - t))
        if h < min_step * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size {h:.3g} too small at t={t:.6g}")
        try:
            k = [k0]
            for i in range(1, 7):
                yi = y + direction * h * sum(a * kj for a, kj in zip(_A[i], k))
                k.append(call(t + direction * _C[i] * h, yi))
        except StopIntegration as exc:
            status = f"stopped: {exc}"
            break
        y_new = y + direction * h * sum(b * kj for b, kj in zip(_B5, k))
        err_vec = direction * h * sum(e * kj for e, kj in zip(_E, k))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t += direction * h
            y = y_new
            k0 = k[6]
            stats.steps += 1
            stats.max_error = max(stats.max_error, err)
            ts.append(t)
            ys.append(y.copy())
            grow = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            h *= grow
        else:
            stats.rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
    return OdeSolution(np.array(ts), np.array(ys), stats, status)


def _initial_step(y, f, rtol, atol):
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f / scale) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        return 1e-6
    return 0.01 * d0 / d1


def rk4_step(rhs, t, y, dt):
    """One classical RK4 step; ``dt`` may be an array broadcasting against ``y``'s trailing axis."""
    k1 = rhs(t, y)
    k2 = rhs(t + dt / 2, y + dt / 2 * k1)
    k3 = rhs(t + dt / 2, y + dt / 2 * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4(rhs, t0, y0, t_end, n_steps):
    """Fixed-step RK4 with ``n_steps`` equal steps; returns all nodes."""
    ts = np.linspace(t0, t_end, n_steps + 1)
    y = np.array(y0, dtype=float)
    ys = [y.copy()]
    stats = IntegratorStats()
    status = "ok"
    for i in range(n_steps):
        try:
            y = rk4_step(rhs, ts[i], y, ts[i + 1] - ts[i])
        except StopIntegration as exc:
            status = f"stopped: {exc}"
            ts = ts[: i + 1]
            break
        stats.steps += 1
        stats.rhs_evals += 4
        ys.append(y.copy())
    return OdeSolution(np.asarray(ts), np.array(ys), stats, status)
