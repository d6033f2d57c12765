"""Planar control systems q' = f(q, u) and the closed forms of the Riemannian,
Zermelo and co-Zermelo families.

Every expression-backed kind is reduced to a pair of expressions
``(f1, f2)`` in (q1, q2, u), so derivative access goes through one jet
engine regardless of kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .expr import Const, Expression, as_expression, jet_array, to_string
from .expr.ast import add, div, func, mul, sub_

KINDS = ("general", "riemannian", "zermelo", "cozermelo")


class NavigationConditionError(ValueError):
    """|X| >= 1 or |Upsilon| >= 1 (or the co-Zermelo denominator is not positive)."""


class SingularFrameError(ValueError):
    pass


@dataclass(frozen=True)
class ControlDomain:
    kind: str = "circle"  # "circle" or "interval"
    lo: float = 0.0
    hi: float = 2 * math.pi

    @classmethod
    def circle(cls):
        return cls("circle", 0.0, 2 * math.pi)

    @classmethod
    def interval(cls, lo, hi):
        if not hi > lo:
            raise ValueError("interval control domain needs hi > lo")
        return cls("interval", float(lo), float(hi))

    def samples(self, n):
        """``n`` control values: uniform on the circle, cell midpoints on an interval."""
        if self.kind == "circle":
            return self.lo + (self.hi - self.lo) * np.arange(n) / n
        return self.lo + (self.hi - self.lo) * (np.arange(n) + 0.5) / n


@dataclass(frozen=True)
class FramePair:
    """Two planar vector fields e1, e2 given by coordinate components in (q1, q2)."""

    e1: Tuple[Expression, Expression]
    e2: Tuple[Expression, Expression]

    @classmethod
    def of(cls, e1, e2):
        return cls(tuple(as_expression(x) for x in e1), tuple(as_expression(x) for x in e2))

    @classmethod
    def flat(cls):
        return cls.of(["1", "0"], ["0", "1"])

    def jets(self, q1, q2):
        """Values and q-derivatives: arrays E, dE_dq1, dE_dq2 of shape (2, 2, ...), columns e1, e2."""
        q1, q2 = np.broadcast_arrays(np.asarray(q1, float), np.asarray(q2, float))
        E = np.empty((2, 2) + q1.shape)
        E1 = np.empty_like(E)
        E2 = np.empty_like(E)
        for col, vec in enumerate((self.e1, self.e2)):
            for row in range(2):
                d, _, _ = jet_array(vec[row], q1, q2, 0.0, "u", strict=True)
                E[row, col], E1[row, col], E2[row, col] = d[0], d[4], d[5]
        return E, E1, E2


@dataclass(frozen=True)
class ZermeloData:
    frame: FramePair
    X1: Expression  # <X, e1>
    X2: Expression  # <X, e2>


@dataclass(frozen=True)
class CoZermeloData:
    frame: FramePair
    ups1: Expression  # <Upsilon, e1>
    ups2: Expression  # <Upsilon, e2>


@dataclass(frozen=True)
class VelocityJets:
    """Arrays of shape (2, ...) for f and its partial derivatives."""

    f: np.ndarray
    fu: np.ndarray
    fuu: np.ndarray
    fuuu: np.ndarray
    fq1: np.ndarray
    fq2: np.ndarray
    fuq1: np.ndarray
    fuq2: np.ndarray
    bad: Optional[np.ndarray] = None
    reason: Optional[str] = None


@dataclass(frozen=True)
class ControlSystem2D:
    kind: str
    f: Tuple[Expression, Expression]
    control: ControlDomain = field(default_factory=ControlDomain.circle)
    epsilon_hint: Optional[int] = None
    frame: Optional[FramePair] = None
    zermelo: Optional[ZermeloData] = None
    cozermelo: Optional[CoZermeloData] = None

    def jets(self, q1, q2, u, strict=False):
        parts = []
        bad = None
        reason = None
        for comp in self.f:
            d, b, where = jet_array(comp, q1, q2, u, "u", strict=strict)
            parts.append(d)
            if b is not None:
                bad = b if bad is None else bad | b
                reason = reason or where
        checks = []
        if self.cozermelo is not None:
            checks.append((~(_cozermelo_phi(self.cozermelo, q1, q2, u) > 0), "phi <= 0"))
        if self.zermelo is not None:
            checks.append((~(_zermelo_speed2(self.zermelo, q1, q2, u) < 1), "|X| >= 1"))
        for viol, what in checks:
            if viol.any():
                if strict:
                    raise NavigationConditionError(f"navigation condition violated ({what})")
                bad = viol if bad is None else bad | viol
                reason = reason or f"navigation condition violated ({what})"
        d = np.stack(parts)  # (2, 8, ...)
        return VelocityJets(d[:, 0], d[:, 1], d[:, 2], d[:, 3], d[:, 4], d[:, 5], d[:, 6], d[:, 7],
                            bad, reason)

    def jets_lattice(self, Q1, Q2, U):
        return self.jets(Q1, Q2, U)

    def describe(self):
        return f"{self.kind}: f = ({to_string(self.f[0])}, {to_string(self.f[1])})"


# ------------------------------------------------------------ constructors

def general(f1, f2, control=None, epsilon_hint=None):
    return ControlSystem2D("general", (as_expression(f1), as_expression(f2)),
                           control or ControlDomain.circle(), epsilon_hint)


def _rotating(frame):
    cu, su = func("cos", "u"), func("sin", "u")
    return tuple(add(mul(cu, frame.e1[i]), mul(su, frame.e2[i])) for i in range(2))


def riemannian(e1, e2, epsilon_hint=None):
    frame = e1 if isinstance(e1, FramePair) else FramePair.of(e1, e2)
    return ControlSystem2D("riemannian", _rotating(frame), ControlDomain.circle(), epsilon_hint,
                           frame=frame)


def zermelo(e1, e2, X1, X2, epsilon_hint=None):
    """Zermelo system with drift given in frame components X1 = <X, e1>, X2 = <X, e2>."""
    frame = e1 if isinstance(e1, FramePair) else FramePair.of(e1, e2)
    X1, X2 = as_expression(X1), as_expression(X2)
    rot = _rotating(frame)
    f = tuple(add(add(mul(X1, frame.e1[i]), mul(X2, frame.e2[i])), rot[i]) for i in range(2))
    return ControlSystem2D("zermelo", f, ControlDomain.circle(), epsilon_hint, frame=frame,
                           zermelo=ZermeloData(frame, X1, X2))


def drift_frame_components(frame, Xc1, Xc2):
    """Convert a drift given in coordinates to frame components (X1, X2) by Cramer's rule."""
    Xc1, Xc2 = as_expression(Xc1), as_expression(Xc2)
    (a, c), (b, d) = frame.e1, frame.e2  # E = [[a, b], [c, d]]
    det = sub_(mul(a, d), mul(b, c))
    X1 = div(sub_(mul(Xc1, d), mul(Xc2, b)), det)
    X2 = div(sub_(mul(a, Xc2), mul(c, Xc1)), det)
    return X1, X2


def cozermelo(e1, e2, ups1, ups2, epsilon_hint=None):
    frame = e1 if isinstance(e1, FramePair) else FramePair.of(e1, e2)
    ups1, ups2 = as_expression(ups1), as_expression(ups2)
    phi = add(add(Const(1.0), mul(func("cos", "u"), ups1)), mul(func("sin", "u"), ups2))
    rot = _rotating(frame)
    f = tuple(div(rot[i], phi) for i in range(2))
    return ControlSystem2D("cozermelo", f, ControlDomain.circle(), epsilon_hint, frame=frame,
                           cozermelo=CoZermeloData(frame, ups1, ups2))


# ------------------------------------------------------------- operations

def velocity_jet(sys, q, u):
    """Exact jets of (f1, f2) at one point; raises on domain or navigation violations."""
    from .expr import Jet

    vj = sys.jets(q[0], q[1], u, strict=True)
    out = []
    for i in range(2):
        out.append(Jet(*(float(np.asarray(getattr(vj, n))[i]) for n in
                         ("f", "fu", "fuu", "fuuu", "fq1", "fq2", "fuq1", "fuq2"))))
    return tuple(out)


def frame_bracket_coefficients(frame, q1, q2):
    """(k1, k2) with [e1, e2] = k1 e1 + k2 e2, from exact first-order jets of the frame."""
    E, E1, E2 = frame.jets(q1, q2)
    e1, e2 = E[:, 0], E[:, 1]
    # (De2) e1 - (De1) e2, with D the Jacobian in q
    De2_e1 = E1[:, 1] * e1[0] + E2[:, 1] * e1[1]
    De1_e2 = E1[:, 0] * e2[0] + E2[:, 0] * e2[1]
    br = De2_e1 - De1_e2
    det = E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]
    if np.any(np.abs(det) < 1e-14):
        raise SingularFrameError("frame is not a basis at the requested point")
    k1 = (br[0] * E[1, 1] - br[1] * E[0, 1]) / det
    k2 = (E[0, 0] * br[1] - E[1, 0] * br[0]) / det
    return k1, k2


def frame_structure_constants(frame, q1, q2):
    """Structure constants (c1, c2) of the frame, with ``[e1, e2] = -(c1 e1 + c2 e2)``.

    This is the dual-coframe convention ``d(omega_k) = c^k omega_1 ^ omega_2``;
    it is the sign for which the Zermelo closed form reproduces the
    geodesic flow of the general engine (checked in the test-suite on the
    hyperbolic half-plane).
    """
    k1, k2 = frame_bracket_coefficients(frame, q1, q2)
    return -k1, -k2


def zermelo_cZ(data, q1, q2, u):
    """Closed-form fibre rate of the Zermelo Hamiltonian field on h = 1.

    ``u' = -c_Z``.  The ``sin^2 u`` term enters with a minus sign: that is what
    the adjoint equation for H = <lambda, X> + |lambda| gives, and what the
    general engine reproduces (``c_Z = c / theta'``).
    """
    E, E1, E2 = data.frame.jets(q1, q2)
    X1, _, _ = jet_array(data.X1, q1, q2, 0.0, "u", strict=True)
    X2, _, _ = jet_array(data.X2, q1, q2, 0.0, "u", strict=True)

    def along(e, Xd):  # L_e X = e . grad X
        return e[0] * Xd[4] + e[1] * Xd[5]

    e1, e2 = E[:, 0], E[:, 1]
    c1, c2 = frame_structure_constants(data.frame, q1, q2)
    cu, su = np.cos(u), np.sin(u)
    return (cu * cu * along(e2, X1) + cu * su * (along(e2, X2) - along(e1, X1))
            - su * su * along(e1, X2)
            + (1 + cu * X1[0] + su * X2[0]) * (c1 * cu + c2 * su))


def zermelo_field(data, q1, q2, u):
    """Closed-form Zermelo Hamiltonian field (q1', q2', u') = (X + cos u e1 + sin u e2, -c_Z)."""
    E, _, _ = data.frame.jets(q1, q2)
    X1, _, _ = jet_array(data.X1, q1, q2, 0.0, "u", strict=True)
    X2, _, _ = jet_array(data.X2, q1, q2, 0.0, "u", strict=True)
    cu, su = np.cos(u), np.sin(u)
    vel = (X1[0] + cu) * E[:, 0] + (X2[0] + su) * E[:, 1]
    return vel[0], vel[1], -zermelo_cZ(data, q1, q2, u)


def _frame_pairings(frame, q1, q2, p1, p2):
    E, _, _ = frame.jets(q1, q2)
    l1 = p1 * E[0, 0] + p2 * E[1, 0]
    l2 = p1 * E[0, 1] + p2 * E[1, 1]
    return l1, l2


def cozermelo_hamiltonian(data, q1, q2, p1, p2):
    """Co-Zermelo Hamiltonian h(lambda) for a covector with coordinate components (p1, p2)."""
    l1, l2 = _frame_pairings(data.frame, q1, q2, p1, p2)
    y1, _, _ = jet_array(data.ups1, q1, q2, 0.0, "u", strict=True)
    y2, _, _ = jet_array(data.ups2, q1, q2, 0.0, "u", strict=True)
    y1, y2 = y1[0], y2[0]
    ups2 = y1 * y1 + y2 * y2
    if np.any(ups2 >= 1):
        raise NavigationConditionError("|Upsilon|_g >= 1")
    ly = l1 * y1 + l2 * y2
    ll = l1 * l1 + l2 * l2
    return (-ly + np.sqrt(ly * ly + (1 - ups2) * ll)) / (1 - ups2)


def _zermelo_speed2(data, q1, q2, u):
    X1, _, _ = jet_array(data.X1, q1, q2, u, "u", strict=False)
    X2, _, _ = jet_array(data.X2, q1, q2, u, "u", strict=False)
    return X1[0] ** 2 + X2[0] ** 2


def _cozermelo_phi(data, q1, q2, u):
    y1, _, _ = jet_array(data.ups1, q1, q2, 0.0, "u", strict=False)
    y2, _, _ = jet_array(data.ups2, q1, q2, 0.0, "u", strict=False)
    return 1 + np.cos(u) * y1[0] + np.sin(u) * y2[0]


def gaussian_curvature(frame, q1, q2, h=2e-3):
    """Gaussian curvature of the metric making ``frame`` orthonormal.

    Uses ``K = e1(k2) - e2(k1) - k1^2 - k2^2`` with ``[e1, e2] = k1 e1 + k2 e2``;
    the frame derivatives of k1, k2 are taken by lattice differences.
    """
    from .invariants.lattice import Patch, lattice_points

    q1a, q2a = np.atleast_1d(np.asarray(q1, float)), np.atleast_1d(np.asarray(q2, float))
    Q1, Q2, _ = lattice_points(q1a, q2a, np.zeros_like(q1a), h, 2, 0)
    k1, k2 = frame_bracket_coefficients(frame, Q1, Q2)
    E, _, _ = frame.jets(Q1, Q2)
    K1, K2 = Patch(k1, h), Patch(k2, h)
    e = [[Patch(E[r, c], h) for r in range(2)] for c in range(2)]  # e[col][row]
    e1k2 = e[0][0] * K2.d(0) + e[0][1] * K2.d(1)
    e2k1 = e[1][0] * K1.d(0) + e[1][1] * K1.d(1)
    K = e1k2 - e2k1 - K1 * K1 - K2 * K2
    out = K.center()
    return out if np.ndim(q1) or np.ndim(q2) else float(out[0])


def cozermelo_kappa_closed(data, q1, q2, u, h=2e-3):
    """Control curvature of a co-Zermelo problem from its closed form.

    ``phi^-2 (K_g + Omega^2 + sin u e1(Omega) - cos u e2(Omega) - S(phi))`` with
    ``S(phi) = phi L_h(L_h phi / 2) - (L_h phi / 2)^2``; Lie derivatives along the
    closed-form Hamiltonian field are taken on lattices.  Exact for the
    commuting-frame, exact-form configuration; other frames are experimental.
    """
    from .invariants.lattice import Patch, lattice_points

    scalar = not (np.ndim(q1) or np.ndim(q2) or np.ndim(u))
    q1a, q2a, ua = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, float)) for v in (q1, q2, u)))
    Q1, Q2, U = lattice_points(q1a, q2a, ua, h, 4, 4)
    P = lambda a: Patch(a, h)  # noqa: E731

    frame = data.frame
    E, E1, E2 = frame.jets(Q1, Q2)
    y1, _, _ = jet_array(data.ups1, Q1, Q2, 0.0, "u", strict=True)
    y2, _, _ = jet_array(data.ups2, Q1, Q2, 0.0, "u", strict=True)
    if np.any(y1[0] ** 2 + y2[0] ** 2 >= 1):
        raise NavigationConditionError("|Upsilon|_g >= 1 on the stencil")
    # coordinate components of Upsilon: ups = E^T Y  =>  Y = E^-T ups
    det = E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]
    Yc1 = (E[1, 1] * y1[0] - E[1, 0] * y2[0]) / det
    Yc2 = (-E[0, 1] * y1[0] + E[0, 0] * y2[0]) / det
    Yc1, Yc2, detP = P(Yc1), P(Yc2), P(det)
    Omega = -(Yc2.d(0) - Yc1.d(1)) * detP

    k1, k2 = frame_bracket_coefficients(frame, Q1, Q2)
    c1, c2 = P(-k1), P(-k2)
    e1 = (P(E[0, 0]), P(E[1, 0]))
    e2 = (P(E[0, 1]), P(E[1, 1]))
    K1, K2 = P(k1), P(k2)
    Kg = (e1[0] * K2.d(0) + e1[1] * K2.d(1)) - (e2[0] * K1.d(0) + e2[1] * K1.d(1)) - K1 * K1 - K2 * K2

    cu, su = P(np.cos(U)), P(np.sin(U))
    phi = 1 + cu * P(y1[0]) + su * P(y2[0])
    c_g = -(c1 * cu + c2 * su)
    hq1 = (cu * e1[0] + su * e2[0]) / phi
    hq2 = (cu * e1[1] + su * e2[1]) / phi
    hu = (c_g + Omega) / phi

    def Lh(g):
        return hq1 * g.d(0) + hq2 * g.d(1) + hu * g.d(2)

    half = Lh(phi) * 0.5
    S = phi * Lh(half) - half * half
    e1Om = e1[0] * Omega.d(0) + e1[1] * Omega.d(1)
    e2Om = e2[0] * Omega.d(0) + e2[1] * Omega.d(1)
    kappa = (Kg + Omega * Omega + su * e1Om - cu * e2Om - S) / (phi * phi)
    out = kappa.center()
    return float(out[0]) if scalar else out
