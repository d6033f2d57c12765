"""The acceptance battery: one function per criterion, shared by ``selftest`` and the test-suite.

Every check returns a :class:`CheckResult`; ``quick=True`` shrinks grids and
sample counts so the whole battery fits in a few seconds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .. import systems as S
from ..expr import substitute
from ..flows import FlowConfig, MoserFamily, extremal_flow, generate_commuting_system, zermelo_closed_flow
from ..invariants import InvariantConfig, evaluate
from .commands import RegionGrid, cmd_check, frame_bracket_residual


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""
    seconds: float = 0.0

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _timed(fn):
    def run(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# ------------------------------------------------------------ reference systems

def flat_riemannian():
    return S.riemannian(["1", "0"], ["0", "1"])


def sphere_chart():
    return S.riemannian(["1", "0"], ["0", "1/sin(q1)"])


def hyperbolic_half_plane():
    return S.riemannian(["q2", "0"], ["0", "q2"])


def closing_cozermelo():
    return S.cozermelo(["1", "0"], ["0", "1"], "2*q1", "2*q2")


def closing_kappa(q1, q2, u):
    return 3.0 / (1 + 2 * q1 * np.cos(u) + 2 * q2 * np.sin(u)) ** 4


def flat_zermelo(X1, X2):
    return S.zermelo(["1", "0"], ["0", "1"], X1, X2)


def _poly(rng, scale):
    c = rng.uniform(-scale, scale, 6)
    return (f"{c[0]:.4f} + {c[1]:.4f}*q1 + {c[2]:.4f}*q2 + {c[3]:.4f}*q1^2 + {c[4]:.4f}*q1*q2"
            f" + {c[5]:.4f}*q2^2")


def random_polynomial_system(rng):
    """A convex General system: a perturbed ellipse with polynomial (in q) radii and offset."""
    r1, r2 = _poly(rng, 0.25), _poly(rng, 0.25)
    o1, o2 = _poly(rng, 0.15), _poly(rng, 0.15)
    w = _poly(rng, 0.03)
    f1 = f"(1 + {r1})*cos(u) + {o1} + ({w})*cos(2*u)"
    f2 = f"(1 + {r2})*sin(u) + {o2} + ({w})*sin(3*u)"
    return S.general(f1, f2)


def random_battery(n_systems, n_points, seed=7, box=0.3):
    """Systems with their sample points; systems with any invalid sample are redrawn."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_systems:
        sys = random_polynomial_system(rng)
        q1, q2 = rng.uniform(-box, box, (2, n_points))
        u = rng.uniform(0, 2 * math.pi, n_points)
        g = evaluate(sys, q1, q2, u, level="fiber")
        if all(s == "ok" for s in g.status) and np.all(g["epsilon"] == 1):
            out.append((sys, q1, q2, u))
    return out


def random_moser_families(n, seed=11):
    rng = np.random.default_rng(seed)
    fams = []
    for k in range(n):
        a, b, c, d = rng.uniform(-0.3, 0.3, 4)
        a1 = f"{a:.4f}*sin(u) + {b:.4f}*u"
        if k % 2 == 0:
            a2 = f"{c:.4f}*q2^2 + {d:.4f}*u*q2"
        else:
            a2 = f"{c:.4f}*cos(u) + {d:.4f}*u^2"  # a2 = a2(u)
        fams.append(MoserFamily(a1, a2, 1, float(rng.uniform(-0.5, 0.5))))
    return fams


# ------------------------------------------------------------------- criteria

@_timed
def criterion_1(quick=False, cfg=None):
    """Closed-form kappa of the closing co-Zermelo example."""
    n, m = (5, 8) if quick else (9, 16)
    grid = RegionGrid((-0.3, 0.3), (-0.3, 0.3), n, m)
    sys = closing_cozermelo()
    t0 = time.perf_counter()
    g = evaluate(sys, *grid.points(sys.control), cfg or InvariantConfig(), level="kappa")
    elapsed = time.perf_counter() - t0
    ex = closing_kappa(g.q1, g.q2, g.u)
    rel = float(np.max(np.abs(g["kappa"] / ex - 1))) if all(s == "ok" for s in g.status) else math.inf
    ok = rel <= 1e-3 and elapsed < 60
    return CheckResult("1 closing co-Zermelo kappa = 3 phi^-4", ok, rel, 1e-3,
                       f"max rel err {rel:.2e} on {n}x{n}x{m} (tol 1e-3), {elapsed:.1f} s (limit 60 s)")


@_timed
def criterion_2(quick=False, cfg=None):
    """Riemannian sanity against the Gaussian-curvature oracle."""
    cfg = cfg or InvariantConfig()
    n, m = (3, 8) if quick else (5, 8)
    parts, ok = [], True
    max_b = 0.0

    g = evaluate(flat_riemannian(), *RegionGrid((-1, 1), (-1, 1), n, m).points(S.ControlDomain.circle()), cfg)
    flat = max(float(np.max(np.abs(g[k]))) for k in ("kappa", "b", "c"))
    max_b = max(max_b, float(np.max(np.abs(g["b"]))))
    ok &= flat < 1e-8 and g.valid.all()
    parts.append(f"flat max|kappa,b,c| {flat:.1e} (tol 1e-8)")

    for name, sys, region, frame in (
            ("sphere", sphere_chart(), ((0.5, 2.5), (-1, 1)), None),
            ("hyperbolic", hyperbolic_half_plane(), ((-1, 1), (0.5, 2.0)), None)):
        pts = RegionGrid(*region, n, m).points(sys.control)
        g = evaluate(sys, *pts, cfg)
        oracle = S.gaussian_curvature(sys.frame, pts[0], pts[1])
        err = float(np.max(np.abs(g["kappa"] - oracle)))
        target = 1.0 if name == "sphere" else -1.0
        err_t = float(np.max(np.abs(g["kappa"] - target)))
        max_b = max(max_b, float(np.max(np.abs(g["b"]))))
        ok &= err < 1e-4 and err_t < 1e-4 and g.valid.all()
        parts.append(f"{name} |kappa - K| {err:.1e}, |kappa - ({target:+.0f})| {err_t:.1e} (tol 1e-4)")
    ok &= max_b < 1e-7
    parts.append(f"max|b| {max_b:.1e} (tol 1e-7)")
    return CheckResult("2 Riemannian sanity", bool(ok), max_b, 1e-7, "; ".join(parts))


CONVERGENCE_STEPS = (0.04, 0.02, 0.01)


def residual_convergence(sys, q1, q2, u, steps=CONVERGENCE_STEPS, cfg=None):
    """Sup-norm of res_bnk and res_lemma per step, and the empirical orders of the last halving."""
    cfg = cfg or InvariantConfig()
    sup = {"res_bnk": [], "res_lemma": []}
    for h in steps:
        g = evaluate(sys, q1, q2, u, replace(cfg, fd_step=h))
        for k in sup:
            sup[k].append(float(np.max(np.abs(g[k]))))
    orders = {k: math.log2(v[-2] / v[-1]) if v[-1] > 0 else math.inf for k, v in sup.items()}
    return sup, orders


@_timed
def criterion_3(quick=False, cfg=None):
    """Identities bnk and lemma converge under step halving on random General systems."""
    ns, npnt = (4, 10) if quick else (20, 50)
    worst_order, worst_term = math.inf, 0.0
    for sys, q1, q2, u in random_battery(ns, npnt):
        sup, orders = residual_convergence(sys, q1, q2, u, cfg=cfg)
        worst_order = min(worst_order, *orders.values())
        worst_term = max(worst_term, sup["res_bnk"][-1], sup["res_lemma"][-1])
    ok = worst_order >= 1.8 and worst_term < 1e-4
    steps = "/".join(f"{h:g}" for h in CONVERGENCE_STEPS)
    return CheckResult("3 identity convergence", ok, worst_order, 1.8,
                       f"{ns} systems x {npnt} points, steps {steps}: min order {worst_order:.2f} (>= 1.8), "
                       f"max terminal residual {worst_term:.1e} (< 1e-4)")


@_timed
def criterion_4(quick=False, cfg=None):
    """Bracket-oracle kappa against the coordinate formula."""
    ns, npnt = (4, 10) if quick else (20, 50)
    worst = 0.0
    for sys, q1, q2, u in random_battery(ns, npnt):
        g = evaluate(sys, q1, q2, u, cfg or InvariantConfig())
        rel = np.abs(g["res_bracket"]) / np.maximum(np.abs(g["kappa"]), 1.0)
        worst = max(worst, float(np.max(rel)))
    return CheckResult("4 dual-path kappa", worst <= 1e-3, worst, 1e-3,
                       f"max |kappa_bracket - kappa| / max(|kappa|, 1) = {worst:.1e} (tol 1e-3)")


@_timed
def criterion_5(quick=False, cfg=None):
    """Theorem verdicts at the default threshold."""
    n, m = (3, 8) if quick else (5, 8)
    box = RegionGrid((-0.3, 0.3), (-0.3, 0.3), n, m)
    r1 = cmd_check(flat_zermelo("0.3", "0.1"), box, cfg)
    r2 = cmd_check(flat_zermelo("q2", "0"), RegionGrid((-0.3, 0.3), (-0.3, 0.3), n, m), cfg)
    r3 = cmd_check(closing_cozermelo(), box, cfg)
    ok = r1.verdict_thm2 and not r2.verdict_thm2 and not r3.verdict_thm1
    ok &= r1.reliable and r2.reliable and r3.reliable
    return CheckResult("5 theorem verdicts", bool(ok), 0.0, 1e-5,
                       f"constant drift thm2={r1.verdict_thm2} (want True), drift (q2,0) thm2={r2.verdict_thm2} "
                       f"(want False), closing co-Zermelo thm1={r3.verdict_thm1} (want False)")


@_timed
def criterion_6(quick=False, cfg=None):
    """Moser-generated systems commute and are flat; a2 = a2(u) families are trivializable."""
    cfg = cfg or InvariantConfig()
    n, m, nf = (3, 8, 2) if quick else (7, 12, 5)
    grid = RegionGrid((-0.4, 0.4), (-0.4, 0.4), n, m)
    sup_br = sup_k = 0.0
    thm2 = True
    for k, fam in enumerate(random_moser_families(nf)):
        sys = generate_commuting_system(fam)
        pts = grid.points(sys.control)
        sup_br = max(sup_br, float(np.max(frame_bracket_residual(sys, *pts))))
        level = "verdict" if k % 2 else "kappa"
        g = evaluate(sys, *pts, cfg, level=level)
        if not g.valid.all():
            sup_k = math.inf
        sup_k = max(sup_k, float(np.max(np.abs(g["kappa"]))))
        if level == "verdict":
            from .commands import report_from_grid

            thm2 &= report_from_grid(g).verdict_thm2
    rot = MoserFamily("0", "0", 1, 0.4)
    gen = generate_commuting_system(rot, closed_form=False)
    u = np.linspace(-1.0, 1.8, 15)
    q1, q2 = np.linspace(-0.4, 0.4, 15), np.linspace(0.3, -0.3, 15)
    f = gen.jets(q1, q2, u).f
    rot_err = float(np.max(np.abs(f - np.stack([np.cos(u - 0.4), np.sin(u - 0.4)]))))
    ok = sup_br < 1e-6 and sup_k < 1e-4 and rot_err < 1e-9 and thm2
    return CheckResult("6 Moser generator", bool(ok), sup_k, 1e-4,
                       f"{nf} families on {n}x{n}x{m}: sup|[f,f_u]| {sup_br:.1e} (< 1e-6), sup|kappa| {sup_k:.1e} "
                       f"(< 1e-4), rotation case err {rot_err:.1e} (< 1e-9), a2(u) families thm2={thm2}")


def clairaut_drift(traj):
    I = np.sin(traj.q[:, 0]) * np.sin(traj.u)
    return float(np.max(np.abs(I - I[0])))


@_timed
def criterion_7(quick=False, cfg=None):
    """Zermelo general-vs-closed-form extremals; Clairaut integral on the sphere."""
    fcfg = cfg or FlowConfig()
    cases = [("0.5", "0"), ("0.3*q2", "0.2*sin(q1)")]
    if quick:
        cases = cases[1:]
    worst = 0.0
    for X in cases:
        sys = flat_zermelo(*X)
        for q0, u0 in (((0.1, -0.2), 0.3), ((0.0, 0.2), 2.0)):
            a = extremal_flow(sys, q0, u0, 1.0, fcfg)
            b = zermelo_closed_flow(sys, q0, u0, 1.0, fcfg)
            t = np.linspace(0, 1, 21)
            qa = np.stack([np.interp(t, a.t, a.q[:, i]) for i in range(2)])
            qb = np.stack([np.interp(t, b.t, b.q[:, i]) for i in range(2)])
            worst = max(worst, float(np.max(np.abs(qa - qb))), float(np.max(np.abs(a.q[-1] - b.q[-1]))))
            if a.status != "ok" or b.status != "ok" or a.t[-1] != 1.0:
                worst = math.inf
    drift = 0.0
    for q0, u0 in (((1.0, 0.0), 0.7), ((1.3, 0.5), 2.2)):
        tr = extremal_flow(sphere_chart(), q0, u0, 1.0, fcfg)
        drift = max(drift, clairaut_drift(tr))
    ok = worst < 1e-6 and drift < 1e-6
    return CheckResult("7 flow cross-check", bool(ok), max(worst, drift), 1e-6,
                       f"Zermelo paths max gap {worst:.1e} (< 1e-6), Clairaut drift {drift:.1e} (< 1e-6)")


def shifted(sys, delta):
    """The same system with control origin moved: f~(q, u) = f(q, u + delta)."""
    shift = {"u": f"u + {delta!r}"}
    return S.general(*(substitute(e, shift) for e in sys.f))


def reoriented(sys):
    """f^(q, u) = f(q, -u)."""
    return S.general(*(substitute(e, {"u": "-u"}) for e in sys.f))


@_timed
def criterion_8(quick=False, cfg=None, delta=0.37):
    """kappa is unchanged under u -> u + delta and u -> -u."""
    cfg = cfg or InvariantConfig()
    ns, npnt = (2, 8) if quick else (6, 20)
    cases = [(s, q1, q2, u) for s, q1, q2, u in random_battery(ns, npnt, seed=3)]
    rng = np.random.default_rng(5)
    q1, q2 = rng.uniform(-0.3, 0.3, (2, npnt))
    cases.append((closing_cozermelo(), q1, q2, rng.uniform(0, 2 * math.pi, npnt)))
    q1 = rng.uniform(0.6, 2.4, npnt)
    cases.append((sphere_chart(), q1, q2, rng.uniform(0, 2 * math.pi, npnt)))
    worst = 0.0
    for sys, q1, q2, u in cases:
        k0 = evaluate(sys, q1, q2, u, cfg, level="kappa")["kappa"]
        k1 = evaluate(shifted(sys, delta), q1, q2, u - delta, cfg, level="kappa")["kappa"]
        k2 = evaluate(reoriented(sys), q1, q2, -u, cfg, level="kappa")["kappa"]
        worst = max(worst, float(np.max(np.abs(k1 - k0))), float(np.max(np.abs(k2 - k0))))
    return CheckResult("8 invariance of kappa", worst <= 1e-6, worst, 1e-6,
                       f"{len(cases)} systems: max |kappa change| {worst:.1e} under shift {delta} and "
                       f"reorientation (tol 1e-6)")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8)


@_timed
def mutation_check(quick=True, cfg=None):
    """With the sign of b flipped the lemma residual must blow up (the battery detects the fault)."""
    sys, q1, q2, u = random_battery(1, 8 if quick else 20, seed=19)[0]
    g = evaluate(sys, q1, q2, u, cfg or InvariantConfig())
    res = float(np.max(np.abs(g["res_lemma"])))
    return CheckResult("lemma residual small", res < 1e-4, res, 1e-4, f"max|res_lemma| {res:.1e} (< 1e-4)")


def run_battery(quick=False, inject_fault=None):
    """Run every check; ``inject_fault='b-sign'`` flips the sign of b everywhere."""
    cfg = InvariantConfig(flip_b_sign=inject_fault == "b-sign")
    results = [mutation_check(quick, cfg)]
    skip_in_quick = {criterion_3} if quick else set()
    for crit in CRITERIA:
        if crit in skip_in_quick:
            continue
        kwargs = {"quick": quick}
        if crit is criterion_7:
            kwargs["cfg"] = FlowConfig(invariants=cfg)
        else:
            kwargs["cfg"] = cfg
        results.append(crit(**kwargs))
    return results
