"""Extremal trajectories: integral curves of h = f - c d/dtheta on the Hamiltonian level."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..invariants.engine import InvariantConfig, evaluate
from ..systems import zermelo_field
from .integrate import IntegratorStats, StopIntegration, dopri5, rk4


@dataclass(frozen=True)
class FlowConfig:
    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = 0.05
    method: str = "dopri5"  # or "rk4"
    rk4_steps: int = 200
    invariants: InvariantConfig = field(default_factory=InvariantConfig)


@dataclass
class ExtremalTrajectory:
    t: np.ndarray
    q: np.ndarray  # (n, 2)
    u: np.ndarray
    stats: IntegratorStats
    status: str = "ok"

    @property
    def samples(self):
        return [(float(t), (float(q[0]), float(q[1])), float(u)) for t, q, u in zip(self.t, self.q, self.u)]


def extremal_rhs(system, cfg=None):
    """Right-hand side ``(q, u) -> (f(q, u), -c / theta')`` re-deriving c and theta' at every call."""
    inv = (cfg or FlowConfig()).invariants

    def rhs(t, y):
        g = evaluate(system, [y[0]], [y[1]], [y[2]], inv, level="flow")
        if g.status[0] != "ok":
            raise StopIntegration(g.status[0])
        vj = system.jets(np.float64(y[0]), np.float64(y[1]), np.float64(y[2]))
        c, rate = g["c"][0], g["theta_rate"][0]
        return np.array([vj.f[0], vj.f[1], -c / rate])

    return rhs


def _integrate(rhs, y0, t_end, cfg):
    if cfg.method == "rk4":
        sol = rk4(rhs, 0.0, y0, t_end, cfg.rk4_steps)
    else:
        sol = dopri5(rhs, 0.0, y0, t_end, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step)
    return ExtremalTrajectory(sol.t, sol.y[:, :2], sol.y[:, 2], sol.stats, sol.status)


def extremal_flow(system, q0, u0, t_end, cfg=None) -> ExtremalTrajectory:
    """Extremal through (q0, u0); stops early (status ``"stopped: ..."``) if regularity fails."""
    cfg = cfg or FlowConfig()
    return _integrate(extremal_rhs(system, cfg), np.array([q0[0], q0[1], u0], float), t_end, cfg)


def zermelo_closed_flow(system, q0, u0, t_end, cfg=None) -> ExtremalTrajectory:
    """Extremal of a Zermelo system from the closed-form field ``X + cos u e1 + sin u e2 - c_Z d/du``."""
    cfg = cfg or FlowConfig()
    if system.zermelo is None:
        raise ValueError("zermelo_closed_flow needs a Zermelo system")

    def rhs(t, y):
        return np.array([float(v) for v in zermelo_field(system.zermelo, y[0], y[1], y[2])])

    return _integrate(rhs, np.array([q0[0], q0[1], u0], float), t_end, cfg)
