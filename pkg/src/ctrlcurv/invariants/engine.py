"""Fibre data, structure coefficient, control curvature and derived identities.

Everything is computed in the coordinates (q1, q2, u).  Writing ``rho = 1/theta'``
for the reciprocal natural-parameter rate, ``g' = rho dg/du`` and

    F  = f(., u)            (fixed-u field in the plane)
    F' = rho * df/du
    mu1 = (F . grad rho) / rho,   mu2 = (F' . grad rho) / rho,

the Hamiltonian and vertical fields are ``h = (F, -c rho)`` and
``v = (0, 0, rho)``; then ``[v, h] = (F', -c_hat rho)`` with
``c_hat = c' + mu1`` and the coefficient of ``v`` in ``[h, [v, h]]`` is

    kappa = L_F' c - L_F c_hat + c c_hat' - c_hat c' - c_hat mu1 + c mu2.

The ``mu`` terms come from the fact that (q, u) and (q, theta) are different
charts on the level set: a q-derivative at fixed u is not one at fixed theta.
With ``L_h g = L_F g - c g'`` the consistency identities read

    d + c_hat + b c = 0                                  (structure equation)
    c_hat' + mu2 + b c_hat + eps c - L_h b = 0           (lemma)
    kappa' + b kappa + L_h L_h b = 0                     (b, kappa relation)

Scalar fields are sampled on per-sample lattices (see :mod:`.lattice`) and
differentiated there; velocities and their u/q jets are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .lattice import Patch, bracket, lattice_points


class RegularityError(ArithmeticError):
    """f ^ f_u or f_u ^ f_uu vanishes, or the fibre is degenerate."""


class StencilError(ArithmeticError):
    """A lattice point left the domain of the system's expressions."""


@dataclass(frozen=True)
class InvariantConfig:
    fd_step: float = 1e-3
    wedge_tol: float = 1e-9
    alpha_tol: float = 1e-10
    max_points: int = 250_000  # lattice points evaluated per chunk
    flip_b_sign: bool = False  # fault injection used by the self-test


# (half width in q, half width in u) of the lattice each level needs
LEVELS = {"flow": (2, 0), "fiber": (0, 2), "c": (2, 2), "kappa": (4, 4), "verdict": (4, 4), "full": (6, 6)}

FIELDS = ("epsilon", "lam1", "lam2", "alpha", "beta", "theta_rate", "theta_rate_du", "b", "w1", "w2",
          "c", "d", "c_theta", "c_hat", "res_struct",
          "kappa",
          "Lhb", "L2hb", "Lvk", "Lvhb", "res_bnk", "res_lemma", "kappa_bracket", "bracket_q_residual",
          "res_bracket")


@dataclass(frozen=True)
class FiberData:
    epsilon: int
    lam: np.ndarray
    alpha: float
    beta: float
    theta_rate: float
    theta_rate_du: float
    b: float


@dataclass(frozen=True)
class InvariantSample:
    q1: float
    q2: float
    u: float
    c: float
    c_theta: float
    kappa: float
    b: float
    Lhb: float
    L2hb: float
    Lvk: float
    Lvhb: float
    res_bnk: float
    res_lemma: float
    res_bracket: float
    res_struct: float = float("nan")
    epsilon: int = 0
    status: str = "ok"


@dataclass
class InvariantGrid:
    """Column arrays for a batch of samples plus a per-sample status string."""

    q1: np.ndarray
    q2: np.ndarray
    u: np.ndarray
    values: dict
    status: list
    level: str

    @property
    def valid(self):
        return np.array([s == "ok" for s in self.status], dtype=bool)

    def __getitem__(self, name):
        return self.values[name]

    def sample(self, i):
        get = lambda k: float(self.values[k][i]) if k in self.values else float("nan")  # noqa: E731
        kw = {f.name: get(f.name) for f in fields(InvariantSample) if f.name not in ("q1", "q2", "u", "epsilon", "status")}
        return InvariantSample(q1=float(self.q1[i]), q2=float(self.q2[i]), u=float(self.u[i]),
                               epsilon=int(self.values["epsilon"][i]), status=self.status[i], **kw)

    def excluded(self):
        reasons = {}
        for s in self.status:
            if s != "ok":
                reasons[s] = reasons.get(s, 0) + 1
        return reasons


# ------------------------------------------------------------- fibre algebra

def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def fiber_arrays(f, fu, fuu, fuuu):
    """Pointwise fibre quantities from velocity jets (each of shape (2, ...)).

    Returns w1, w2, lambda (normalised by <lambda, f> = 1), alpha, beta with
    ``lambda_uu = alpha lambda + beta lambda_u``.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = _cross(f, fu)
        w2 = _cross(fu, fuu)

        def solve(r0, r1):  # rows of A are f and f_u
            return np.stack([(fu[1] * r0 - f[1] * r1) / w1, (f[0] * r1 - fu[0] * r0) / w1])

        lam = solve(1.0, 0.0)
        lam_u = solve(-_dot(fu, lam), -_dot(fuu, lam))
        lam_uu = solve(-(_dot(fuu, lam) + 2 * _dot(fu, lam_u)),
                       -(_dot(fuuu, lam) + 2 * _dot(fuu, lam_u)))
        D = _cross(lam, lam_u)
        alpha = _cross(lam_uu, lam_u) / D
        beta = _cross(lam, lam_uu) / D
    return w1, w2, lam, alpha, beta


# ------------------------------------------------------------ lattice engine

def _evaluate_chunk(system, q1, q2, u, cfg, level):
    hq, hu = LEVELS[level]
    h = cfg.fd_step
    Q1, Q2, U = lattice_points(q1, q2, u, h, hq, hu)
    vj = system.jets(Q1, Q2, U)
    w1, w2, lam, alpha, beta = fiber_arrays(vj.f, vj.fu, vj.fuu, vj.fuuu)
    B = q1.shape[0]

    def P(a):
        return Patch(a, h)

    def ctr(a):
        return a.center() if isinstance(a, Patch) else P(a).center()

    eps_arr = -np.sign(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.sqrt(np.abs(alpha))
        r = P(rate)
        rho = P(1.0 / rate)
        if hu:
            r_u = r.d(2)
            b = P(beta) / r - r_u / (r * r)
        else:  # the flow level needs no u-derivatives
            r_u = b = P(np.full_like(rate, np.nan))
    if cfg.flip_b_sign:
        b = -b
    eps = P(eps_arr)
    eps_c = ctr(eps)
    out = {
        "epsilon": eps_c,
        "lam1": ctr(lam[0]) * eps_c,
        "lam2": ctr(lam[1]) * eps_c,
        "alpha": ctr(alpha),
        "beta": ctr(beta),
        "theta_rate": ctr(rate),
        "theta_rate_du": r_u.center(),
        "b": b.center(),
        "w1": ctr(w1),
        "w2": ctr(w2),
    }
    if not hu:
        del out["theta_rate_du"], out["b"]

    # per-sample exclusion reasons, most specific first
    status = ["ok"] * B
    flat = lambda a: a.reshape(B, -1)  # noqa: E731
    bad_alpha = np.any(flat(np.abs(alpha)) < cfg.alpha_tol, axis=1) | ~np.all(np.isfinite(flat(alpha)), axis=1)
    sign_flip = np.any(flat(eps_arr) != eps_c[:, None], axis=1)
    bad_jets = np.any(flat(vj.bad), axis=1) if vj.bad is not None else np.zeros(B, bool)
    for i in range(B):
        if abs(out["w1"][i]) < cfg.wedge_tol or abs(out["w2"][i]) < cfg.wedge_tol or not (
                np.isfinite(out["w1"][i]) and np.isfinite(out["w2"][i])):
            status[i] = f"regularity violation (w1={out['w1'][i]:.3g}, w2={out['w2'][i]:.3g})"
        elif bad_jets[i]:
            status[i] = f"stencil leaves domain: {vj.reason}"
        elif bad_alpha[i]:
            status[i] = "convexity degeneracy (alpha ~ 0)"
        elif sign_flip[i]:
            status[i] = "convexity changes sign on stencil"
        elif system.epsilon_hint is not None and eps_c[i] != system.epsilon_hint:
            status[i] = f"epsilon {int(eps_c[i]):+d} contradicts hint {system.epsilon_hint:+d}"

    if level != "fiber":
        _structure(vj, P, rho, b, eps, out, level)

    for i in range(B):
        if status[i] == "ok" and not all(np.isfinite(v[i]) for v in out.values()):
            status[i] = "non-finite result"
    return out, status


def _structure(vj, P, rho, b, eps, out, level):
    F = (P(vj.f[0]), P(vj.f[1]))
    Fu = (P(vj.fu[0]), P(vj.fu[1]))
    Fq = ((P(vj.fq1[0]), P(vj.fq1[1])), (P(vj.fq2[0]), P(vj.fq2[1])))
    Fuq = ((P(vj.fuq1[0]), P(vj.fuq1[1])), (P(vj.fuq2[0]), P(vj.fuq2[1])))
    Fp = (Fu[0] * rho, Fu[1] * rho)
    grad_rho = (rho.d(0), rho.d(1))

    # [F, F'] = (dF'/dq) F - (dF/dq) F'  at fixed u
    br = []
    for i in range(2):
        dFp = [Fuq[k][i] * rho + Fu[i] * grad_rho[k] for k in range(2)]
        br.append(dFp[0] * F[0] + dFp[1] * F[1] - Fq[0][i] * Fp[0] - Fq[1][i] * Fp[1])
    det = F[0] * Fp[1] - F[1] * Fp[0]
    a = (br[0] * Fp[1] - br[1] * Fp[0]) / det
    d = (F[0] * br[1] - F[1] * br[0]) / det
    c = -(eps * a)

    def prime(g):
        return rho * g.d(2)

    def LF(g):
        return F[0] * g.d(0) + F[1] * g.d(1)

    def LFp(g):
        return Fp[0] * g.d(0) + Fp[1] * g.d(1)

    if level == "flow":
        out["c"] = c.center()
        return
    mu1 = (F[0] * grad_rho[0] + F[1] * grad_rho[1]) / rho
    mu2 = (Fp[0] * grad_rho[0] + Fp[1] * grad_rho[1]) / rho
    c_th = prime(c)
    c_hat = c_th + mu1
    out.update(c=c.center(), d=d.center(), c_theta=c_th.center(), c_hat=c_hat.center(),
               res_struct=(d + c_hat + b * c).center())
    if level == "c":
        return

    kappa = LFp(c) - LF(c_hat) + c * prime(c_hat) - c_hat * c_th - c_hat * mu1 + c * mu2
    out["kappa"] = kappa.center()
    if level == "kappa":
        return

    def Lh(g):
        return LF(g) - c * prime(g)

    Lhb = Lh(b)
    if level == "verdict":
        out.update(Lhb=Lhb.center(), Lvhb=(LFp(b) - c_hat * prime(b)).center())
        return
    L2hb = Lh(Lhb)
    Lvk = prime(kappa)
    out.update(
        Lhb=Lhb.center(),
        L2hb=L2hb.center(),
        Lvk=Lvk.center(),
        Lvhb=(LFp(b) - c_hat * prime(b)).center(),
        res_bnk=(Lvk + b * kappa + L2hb).center(),
        res_lemma=(prime(c_hat) + mu2 + b * c_hat + eps * c - Lhb).center(),
    )

    # independent path: the double bracket by differences of field components only
    zero = rho * 0.0
    hvec = (F[0], F[1], -(c * rho))
    vvec = (zero, zero, rho)
    W = bracket(vvec, hvec)
    Z = bracket(hvec, W)
    kb = (Z[2] / rho).center()
    out.update(kappa_bracket=kb,
               bracket_q_residual=np.hypot(Z[0].center(), Z[1].center()),
               res_bracket=kb - out["kappa"])


def evaluate(system, q1, q2, u, cfg: Optional[InvariantConfig] = None, level="full"):
    """Evaluate invariants at the samples (q1, q2, u) (broadcast 1-D arrays).

    ``level`` selects how much is computed: ``"flow"`` (c and theta' only),
    ``"fiber"``, ``"c"``, ``"kappa"``, ``"verdict"`` (kappa, Lhb and Lvhb on the kappa lattice)
    or ``"full"`` (all derived fields, residuals and the bracket oracle).
    """
    cfg = cfg or InvariantConfig()
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    q1, q2, u = (np.ravel(a).astype(float) for a in np.broadcast_arrays(q1, q2, u))
    hq, hu = LEVELS[level]
    per = (2 * hq + 1) ** 2 * (2 * hu + 1)
    step = max(1, cfg.max_points // per)
    values, status = {}, []
    for s in range(0, q1.size, step):
        sl = slice(s, s + step)
        out, st = _evaluate_chunk(system, q1[sl], q2[sl], u[sl], cfg, level)
        for k, v in out.items():
            values.setdefault(k, []).append(np.asarray(v, dtype=float))
        status.extend(st)
    values = {k: np.concatenate(v) for k, v in values.items()}
    return InvariantGrid(q1, q2, u, values, status, level)


# ---------------------------------------------------------------- point API

def _point(system, q, u, cfg, level):
    g = evaluate(system, [q[0]], [q[1]], [u], cfg, level)
    st = g.status[0]
    if st != "ok":
        if st.startswith("stencil"):
            raise StencilError(st)
        raise RegularityError(st)
    return {k: float(v[0]) for k, v in g.values.items()}


def check_regularity(system, q, u):
    """Raw wedges ``(f ^ f_u, f_u ^ f_uu)`` from exact jets."""
    vj = system.jets(np.float64(q[0]), np.float64(q[1]), np.float64(u), strict=True)
    return float(_cross(vj.f, vj.fu)), float(_cross(vj.fu, vj.fuu))


def adjoint_covector(system, q, u, cfg=None):
    """The covector with <lambda, f> = eps and <lambda, f_u> = 0."""
    cfg = cfg or InvariantConfig()
    vj = system.jets(np.float64(q[0]), np.float64(q[1]), np.float64(u), strict=True)
    w1, w2, lam, alpha, _ = fiber_arrays(vj.f, vj.fu, vj.fuu, vj.fuuu)
    if abs(w1) < cfg.wedge_tol or abs(w2) < cfg.wedge_tol:
        raise RegularityError(f"regularity violation (w1={w1:.3g}, w2={w2:.3g})")
    if not abs(alpha) > cfg.alpha_tol:
        raise RegularityError("convexity degeneracy (alpha ~ 0)")
    return -np.sign(alpha) * np.asarray(lam, dtype=float)


def fiber_data(system, q, u, cfg=None) -> FiberData:
    v = _point(system, q, u, cfg, "fiber")
    return FiberData(epsilon=int(v["epsilon"]), lam=np.array([v["lam1"], v["lam2"]]), alpha=v["alpha"],
                     beta=v["beta"], theta_rate=v["theta_rate"], theta_rate_du=v["theta_rate_du"], b=v["b"])


def structure_c(system, q, u, cfg=None):
    """``(c, d)`` from ``[F, F'] = a F + d F'`` with ``c = -eps a``."""
    v = _point(system, q, u, cfg, "c")
    return v["c"], v["d"]


def curvature_kappa(system, q, u, cfg=None):
    return _point(system, q, u, cfg, "kappa")["kappa"]


def bracket_oracle_kappa(system, q, u, cfg=None, return_residual=False):
    """kappa as the v-coefficient of ``[h, [v, h]]`` computed by differences of field components.

    With ``return_residual`` also returns the norm of the q-components, which must vanish.
    """
    v = _point(system, q, u, cfg, "full")
    if return_residual:
        return v["kappa_bracket"], v["bracket_q_residual"]
    return v["kappa_bracket"]


def derived_invariants(system, q, u, cfg=None) -> InvariantSample:
    g = evaluate(system, [q[0]], [q[1]], [u], cfg, "full")
    if g.status[0] != "ok":
        raise RegularityError(g.status[0])
    return g.sample(0)
