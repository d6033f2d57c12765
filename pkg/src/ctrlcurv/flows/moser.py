"""Moser homotopy: flows of ``X_u(q) = (a1(u) + s q2, a2(u, q2) - q1)`` and the
commuting-frame systems they generate.

With ``P_u`` the flow of ``X`` from ``u0`` to ``u`` and ``J = DP_u(q)``, the
generated system is ``f(q, u) = J^-1 e1``.  Differentiating ``J' = DX J``
gives all jets in closed form along the transported state:

    f_u   = J^-1 e2
    f_uu  = J^-1 Y2,          Y2 = -(s, a2_y)
    f_uuu = J^-1 Y3,          Y3 = dY2/du - DX Y2
    f_qk  = -J^-1 H_k f,      f_uqk = -J^-1 H_k f_u

where ``H_k = dJ/dq_k`` is carried along as a second variational equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._accel import maybe_njit, numba_enabled
from ..expr import as_expression, jet_array, to_string, variables
from ..expr.ast import Const
from ..expr.tape import compile_tape, eval_point
from ..systems import ControlDomain, ControlSystem2D, VelocityJets, general
from .integrate import dopri5, rk4_step


class TransportBlowUp(ArithmeticError):
    pass


@dataclass(frozen=True)
class MoserFamily:
    a1: object  # expression in u
    a2: object  # expression in (u, q2)
    sign: int = 1
    u0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a1", as_expression(self.a1))
        object.__setattr__(self, "a2", as_expression(self.a2))
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not variables(self.a1) <= {"u"}:
            raise ValueError(f"a1 may depend on u only: {to_string(self.a1)}")
        if not variables(self.a2) <= {"u", "q2"}:
            raise ValueError(f"a2 may depend on u and q2 only: {to_string(self.a2)}")

    def a1_value(self, u):
        d, _, _ = jet_array(self.a1, 0.0, 0.0, u, "u", strict=True)
        return d[0]

    def a2_jet(self, y2, u):
        """(a2, da2/dq2, d2a2/dq2^2, d2a2/dq2 du) at (u, q2 = y2)."""
        d, _, _ = jet_array(self.a2, 0.0, y2, u, "q2", strict=True)
        return d[0], d[1], d[2], d[7]

    def is_rotation(self):
        return (isinstance(self.a1, Const) and self.a1.value == 0 and isinstance(self.a2, Const)
                and self.a2.value == 0 and self.sign == 1)


def moser_field(fam, q, u):
    """``X_u(q)``."""
    a2 = fam.a2_jet(np.asarray(q[1], float), u)[0]
    return np.array([fam.a1_value(u) + fam.sign * q[1], a2 - q[0]], dtype=float)


@dataclass(frozen=True)
class TransportConfig:
    rtol: float = 1e-12
    atol: float = 1e-12
    max_norm: float = 1e6


def moser_transport(fam, q0, u_from, u_to, cfg=None):
    """``(P(q0), J)`` for the flow of X from ``u_from`` to ``u_to`` with its Jacobian."""
    cfg = cfg or TransportConfig()
    s = fam.sign

    def rhs(u, y):
        a2, a2y, _, _ = fam.a2_jet(y[1], u)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > cfg.max_norm:
            raise TransportBlowUp(f"transport left the bound {cfg.max_norm:g} at u={u:.6g}")
        J = y[2:].reshape(2, 2)
        DX = np.array([[0.0, s], [-1.0, a2y]])
        X = np.array([fam.a1_value(u) + s * y[1], a2 - y[0]])
        return np.concatenate([X, (DX @ J).ravel()])

    y0 = np.concatenate([np.asarray(q0, float), np.eye(2).ravel()])
    sol = dopri5(rhs, u_from, y0, u_to, rtol=cfg.rtol, atol=cfg.atol)
    y = sol.y[-1]
    return y[:2].copy(), y[2:].reshape(2, 2).copy()


# ------------------------------------------------------------ generated system

def _state_rhs(fam):
    s = fam.sign

    def rhs(u, S):
        a2, a2y, a2yy, _ = fam.a2_jet(S[1], u)
        J = S[2:6].reshape(2, 2, -1)
        H = S[6:14].reshape(2, 2, 2, -1)
        out = np.empty_like(S)
        out[0] = fam.a1_value(u) + s * S[1]
        out[1] = a2 - S[0]
        dJ = out[2:6].reshape(2, 2, -1)
        dJ[0] = s * J[1]
        dJ[1] = -J[0] + a2y * J[1]
        dH = out[6:14].reshape(2, 2, 2, -1)
        dH[0] = s * H[1]
        dH[1] = -H[0] + a2y * H[1] + a2yy * J[1][:, None] * J[1][None, :]
        return out

    return rhs


@maybe_njit
def _kernel_rhs(t2, st2, r2, sign, a1v, uu, S, dS):
    if eval_point(t2[0], t2[1], st2, t2[2], 0.0, S[1], uu, r2) >= 0:
        return False
    a2y = r2[1]
    a2yy = 2.0 * r2[2]
    dS[0] = a1v + sign * S[1]
    dS[1] = r2[0] - S[0]
    for j in range(2):
        dS[2 + j] = sign * S[4 + j]
        dS[4 + j] = -S[2 + j] + a2y * S[4 + j]
        for k in range(2):
            dS[6 + 2 * j + k] = sign * S[10 + 2 * j + k]
            dS[10 + 2 * j + k] = -S[6 + 2 * j + k] + a2y * S[10 + 2 * j + k] + a2yy * S[4 + j] * S[4 + k]
    return True


@maybe_njit
def _a1_at(t1, st1, r1, uu):
    if eval_point(t1[0], t1[1], st1, t1[2], 0.0, 0.0, uu, r1) >= 0:
        return np.nan
    return r1[0]


@maybe_njit
def _kernel_step(t2, st2, r2, sign, a1s, uu, S, dt, k1, k2, k3, k4, tmp):
    """RK4 step; ``a1s`` holds a1 at the start, middle and end of the step."""
    ok = _kernel_rhs(t2, st2, r2, sign, a1s[0], uu, S, k1)
    for i in range(14):
        tmp[i] = S[i] + 0.5 * dt * k1[i]
    ok &= _kernel_rhs(t2, st2, r2, sign, a1s[1], uu + 0.5 * dt, tmp, k2)
    for i in range(14):
        tmp[i] = S[i] + 0.5 * dt * k2[i]
    ok &= _kernel_rhs(t2, st2, r2, sign, a1s[1], uu + 0.5 * dt, tmp, k3)
    for i in range(14):
        tmp[i] = S[i] + dt * k3[i]
    ok &= _kernel_rhs(t2, st2, r2, sign, a1s[2], uu + dt, tmp, k4)
    for i in range(14):
        S[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return ok


@maybe_njit
def _transport_kernel(t1, t2, depth1, depth2, sign, u0, q1, q2, u, nsteps, out):
    """Compiled row transport: ``nsteps[r]`` RK4 steps from u0 to ``u[r, 0]``, then one step per column.

    a1 depends on u only, so its values along a row's u-path are reused by
    the following rows with the same path (all rows of one lattice sample).
    """
    R, m = u.shape
    st1 = np.empty((depth1, 8))
    st2 = np.empty((depth2, 8))
    r1 = np.empty(8)
    r2 = np.empty(8)
    S = np.empty(14)
    k1 = np.empty(14)
    k2 = np.empty(14)
    k3 = np.empty(14)
    k4 = np.empty(14)
    tmp = np.empty(14)
    nmax = 1
    for r in range(R):
        nmax = max(nmax, nsteps[r])
    cache1 = np.empty((nmax, 3))
    cache2 = np.empty((max(m - 1, 1), 3))
    for r in range(R):
        n1 = nsteps[r]
        fresh = r == 0 or n1 != nsteps[r - 1]
        if not fresh:
            for c in range(m):
                if u[r, c] != u[r - 1, c]:
                    fresh = True
                    break
        for i in range(14):
            S[i] = 0.0
        S[0] = q1[r]
        S[1] = q2[r]
        S[2] = 1.0
        S[5] = 1.0
        dt = (u[r, 0] - u0) / n1
        uu = u0
        ok = True
        for s in range(n1):
            if fresh:
                cache1[s, 0] = _a1_at(t1, st1, r1, uu)
                cache1[s, 1] = _a1_at(t1, st1, r1, uu + 0.5 * dt)
                cache1[s, 2] = _a1_at(t1, st1, r1, uu + dt)
            ok &= _kernel_step(t2, st2, r2, sign, cache1[s], uu, S, dt, k1, k2, k3, k4, tmp)
            uu += dt
        uu = u[r, 0]
        for i in range(14):
            out[i, r, 0] = S[i]
        for c in range(1, m):
            h = u[r, c] - u[r, c - 1]
            if fresh:
                cache2[c - 1, 0] = _a1_at(t1, st1, r1, uu)
                cache2[c - 1, 1] = _a1_at(t1, st1, r1, uu + 0.5 * h)
                cache2[c - 1, 2] = _a1_at(t1, st1, r1, uu + h)
            ok &= _kernel_step(t2, st2, r2, sign, cache2[c - 1], uu, S, h, k1, k2, k3, k4, tmp)
            uu = u[r, c]
            for i in range(14):
                out[i, r, c] = S[i]
        if not ok:
            for c in range(m):
                for i in range(14):
                    out[i, r, c] = np.nan


@dataclass(frozen=True)
class GeneratedSystem(ControlSystem2D):
    """General-kind system ``f = J^-1 e1`` evaluated by fresh transport at every query.

    ``max_step`` bounds the RK4 step used to reach each query; queries laid out
    as lattices with u along the last axis reuse one trajectory per row so the
    integration error is a smooth function of the lattice coordinates.
    """

    family: MoserFamily = None
    max_step: float = 1e-2

    def jets(self, q1, q2, u, strict=False):
        q1, q2, u = np.broadcast_arrays(*(np.asarray(v, float) for v in (q1, q2, u)))
        shape = q1.shape
        if q1.ndim == 4:  # (samples, q1 offsets, q2 offsets, u offsets) lattice
            rows = (q1.reshape(-1, shape[-1]), q2.reshape(-1, shape[-1]), u.reshape(-1, shape[-1]))
        else:
            rows = (q1.reshape(-1, 1), q2.reshape(-1, 1), u.reshape(-1, 1))
        S = self._transport_rows(*rows)  # (14, R, m)
        parts = self._jets_from_state(S, rows[2])
        parts = [p.reshape((2,) + shape) for p in parts]
        return VelocityJets(*parts)

    def _transport_rows(self, q1, q2, u):
        fam = self.family
        R, m = u.shape
        span = u[:, 0] - fam.u0
        n = max(1, int(math.ceil(np.max(np.abs(span)) / self.max_step)))
        if numba_enabled():
            ta, tb = compile_tape(fam.a1), compile_tape(fam.a2)
            slots_u = np.array([4, 5, 1], dtype=np.int64)
            slots_q2 = np.array([4, 1, 5], dtype=np.int64)
            out = np.empty((14, R, m))
            nsteps = np.maximum(1, np.ceil(np.abs(span) / self.max_step)).astype(np.int64)
            _transport_kernel((ta.code, ta.consts, slots_u), (tb.code, tb.consts, slots_q2), ta.depth, tb.depth,
                              float(fam.sign), float(fam.u0), np.ascontiguousarray(q1[:, 0]),
                              np.ascontiguousarray(q2[:, 0]), np.ascontiguousarray(u), nsteps, out)
            if not np.all(np.isfinite(out)):
                raise TransportBlowUp("transport left the expressions' domain or overflowed")
            return out
        rhs = _state_rhs(fam)
        S = np.zeros((14, R))
        S[0], S[1] = q1[:, 0], q2[:, 0]
        S[2] = S[5] = 1.0
        dt = span / n
        uu = np.full(R, fam.u0)
        for _ in range(n):
            S = rk4_step(rhs, uu, S, dt)
            uu = uu + dt
        uu = u[:, 0]
        out = np.empty((14, R, m))
        out[:, :, 0] = S
        for k in range(1, m):  # row points share the starting trajectory
            du = u[:, k] - u[:, k - 1]
            S = rk4_step(rhs, uu, S, du)
            uu = u[:, k]
            out[:, :, k] = S
        if not np.all(np.isfinite(out)):
            raise TransportBlowUp("non-finite transport state")
        return out

    def _jets_from_state(self, S, u):
        fam = self.family
        s = fam.sign
        y2 = S[1]
        J = S[2:6].reshape(2, 2, *y2.shape)
        H = S[6:14].reshape(2, 2, 2, *y2.shape)
        a2, a2y, a2yy, a2yu = fam.a2_jet(y2, u)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]

        def solve(v):  # J^-1 v
            return np.stack([(J[1, 1] * v[0] - J[0, 1] * v[1]) / det, (J[0, 0] * v[1] - J[1, 0] * v[0]) / det])

        zero, one = np.zeros_like(y2), np.ones_like(y2)
        X2 = a2 - S[0]
        Y2 = np.stack([-s * one, -a2y])
        dY2 = np.stack([zero, -a2yy * X2 - a2yu])
        DXY2 = np.stack([s * Y2[1], -Y2[0] + a2y * Y2[1]])
        f = solve(np.stack([one, zero]))
        fu = solve(np.stack([zero, one]))
        fuu = solve(Y2)
        fuuu = solve(dY2 - DXY2)

        def dq(k, v):  # -J^-1 H_k v
            Hk = H[:, :, k]
            return -solve(np.stack([Hk[0, 0] * v[0] + Hk[0, 1] * v[1], Hk[1, 0] * v[0] + Hk[1, 1] * v[1]]))

        return f, fu, fuu, fuuu, dq(0, f), dq(1, f), dq(0, fu), dq(1, fu)

    def describe(self):
        fam = self.family
        return (f"generated: a1 = {to_string(fam.a1)}, a2 = {to_string(fam.a2)}, "
                f"sign {fam.sign:+d}, u0 = {fam.u0:g}")


def generate_commuting_system(fam, half_width=1.5, max_step=1e-2, closed_form=True):
    """System whose frame (f, f_u) commutes, built from the Moser family ``fam``.

    The rotation family (a1 = a2 = 0, sign +1) returns the closed form
    ``(cos(u - u0), sin(u - u0))`` on the circle when ``closed_form`` is set.
    """
    if closed_form and fam.is_rotation():
        arg = f"(u - {fam.u0!r})"
        return general(f"cos{arg}", f"sin{arg}")
    control = ControlDomain.interval(fam.u0 - half_width, fam.u0 + half_width)
    return GeneratedSystem("general", (), control,
                           family=fam, max_step=max_step)
