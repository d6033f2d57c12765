import math

import numpy as np
import pytest

from ctrlcurv import systems as S
from ctrlcurv.flows.integrate import dopri5
from ctrlcurv.invariants import (InvariantConfig, RegularityError, StencilError, adjoint_covector,
                                 bracket_oracle_kappa, check_regularity, curvature_kappa, derived_invariants,
                                 evaluate, fiber_data, structure_c)
from ctrlcurv.report.battery import (closing_cozermelo, closing_kappa, flat_riemannian, flat_zermelo,
                                     hyperbolic_half_plane, random_battery, residual_convergence, reoriented,
                                     shifted, sphere_chart)

U8 = np.linspace(0, 2 * math.pi, 8, endpoint=False)


# ------------------------------------------------------------------ regularity and fiber

@pytest.mark.parametrize("u", U8)
def test_regularity_flat(u):
    assert check_regularity(flat_riemannian(), (0.2, -0.1), u) == pytest.approx((1.0, 1.0))


@pytest.mark.parametrize("u", U8)
def test_regularity_zermelo(u):
    w1, _ = check_regularity(flat_zermelo("0.4", "0"), (0.0, 0.0), u)
    assert w1 == pytest.approx(1 + 0.4 * math.cos(u))


def test_regularity_degenerate():
    sys = S.general("cos(u)", "0")
    assert check_regularity(sys, (0.0, 0.0), 0.3)[1] == 0.0
    g = evaluate(sys, [0.0], [0.0], [0.3], level="kappa")
    assert g.status[0].startswith("regularity violation")
    with pytest.raises(RegularityError):
        curvature_kappa(sys, (0.0, 0.0), 0.3)


@pytest.mark.parametrize("u", U8)
def test_adjoint_flat(u):
    assert adjoint_covector(flat_riemannian(), (0.0, 0.0), u) == pytest.approx([math.cos(u), math.sin(u)])


def test_adjoint_zermelo():
    assert adjoint_covector(flat_zermelo("0.5", "0"), (0.0, 0.0), 0.0) == pytest.approx([1 / 1.5, 0.0])


def test_fiber_flat():
    fd = fiber_data(flat_riemannian(), (0.1, 0.2), 0.7)
    assert fd.epsilon == 1
    assert (fd.alpha, fd.beta, fd.theta_rate, fd.b) == pytest.approx((-1.0, 0.0, 1.0, 0.0), abs=1e-12)


def test_fiber_identities():
    sys = S.general("2*cos(u) + 0.2*q1", "sin(u) + 0.1*cos(2*u)")
    for u in U8:
        fd = fiber_data(sys, (0.1, 0.0), u)
        vj = sys.jets(0.1, 0.0, u)
        assert fd.lam @ vj.f == pytest.approx(fd.epsilon)
        assert fd.lam @ vj.fu == pytest.approx(0.0, abs=1e-14)
        assert -fd.epsilon * fd.alpha > 0
        assert fd.theta_rate == pytest.approx(math.sqrt(abs(fd.alpha)))


@pytest.mark.parametrize("f", [("2*cos(u)", "sin(u)"),
                               ("(1 + 0.05*cos(3*u))*cos(u)", "(1 + 0.05*cos(3*u))*sin(u) + 0.2")])
def test_natural_parameter_reproduces_the_fiber(f):
    """Integrating lam'' = -eps theta'^2 lam + (b theta' + theta''/theta') lam' over the whole fiber,
    with theta' and b from the engine, must return the adjoint covector computed directly."""
    sys = S.general(*f)
    q = (0.0, 0.0)

    def fib(u):
        g = evaluate(sys, [q[0]], [q[1]], [u], level="fiber")
        return g["epsilon"][0], g["theta_rate"][0], g["theta_rate_du"][0], g["b"][0]

    def rhs(u, y):
        eps, r, ru, b = fib(u)
        lam, lam_u = y[:2], y[2:]
        return np.concatenate([lam_u, -eps * r * r * lam + (b * r + ru / r) * lam_u])

    h = 1e-5
    lam0 = adjoint_covector(sys, q, 0.0)
    dlam0 = (adjoint_covector(sys, q, h) - adjoint_covector(sys, q, -h)) / (2 * h)
    sol = dopri5(rhs, 0.0, np.concatenate([lam0, dlam0]), 2 * math.pi, rtol=1e-10, atol=1e-10, max_step=0.1)
    for t, y in zip(sol.t[::7], sol.y[::7]):
        assert y[:2] == pytest.approx(adjoint_covector(sys, q, t), abs=1e-6)


@pytest.mark.parametrize("sys, lo, hi", [(sphere_chart(), (0.5, -1.0), (2.5, 1.0)),
                                         (hyperbolic_half_plane(), (-1.0, 0.5), (1.0, 2.0))])
def test_riemannian_b_vanishes_and_kappa_is_u_independent(sys, lo, hi):
    q1, q2, u = np.meshgrid(np.linspace(lo[0], hi[0], 4), np.linspace(lo[1], hi[1], 4), U8, indexing="ij")
    g = evaluate(sys, q1.ravel(), q2.ravel(), u.ravel(), level="kappa")
    assert g.valid.all()
    assert np.max(np.abs(g["b"])) < 1e-7
    k = g["kappa"].reshape(16, 8)
    assert np.max(k.max(axis=1) - k.min(axis=1)) < 1e-5
    assert np.all(g["epsilon"] == 1)


# ------------------------------------------------------------------ c and kappa

def test_structure_flat():
    assert structure_c(flat_riemannian(), (0.3, 0.3), 1.0) == pytest.approx((0.0, 0.0), abs=1e-12)


def _flow(field, q, s):
    sol = dopri5(lambda t, y: field(y), 0.0, np.asarray(q, float), s, rtol=1e-13, atol=1e-13)
    return sol.y[-1]


@pytest.mark.parametrize("u", [0.0, 0.9, 2.3])
def test_structure_hyperbolic_against_flow_commutator(u):
    sys = hyperbolic_half_plane()
    q = np.array([0.2, 1.1])

    def rho(p):
        return 1.0 / evaluate(sys, [p[0]], [p[1]], [u], level="fiber")["theta_rate"][0]

    F = lambda p: sys.jets(p[0], p[1], u).f  # noqa: E731
    Fp = lambda p: rho(p) * sys.jets(p[0], p[1], u).fu  # noqa: E731
    neg = lambda X: (lambda p: -X(p))  # noqa: E731

    def commutator(s):
        p = _flow(F, q, s)
        p = _flow(Fp, p, s)
        p = _flow(neg(F), p, s)
        p = _flow(neg(Fp), p, s)
        return (p - q) / s**2

    s = 0.02
    br = 2 * commutator(s / 2) - commutator(s)  # Richardson on the O(s) term
    A = np.column_stack([F(q), Fp(q)])
    a, _ = np.linalg.solve(A, br)
    eps = fiber_data(sys, q, u).epsilon
    c, _ = structure_c(sys, q, u)
    assert c == pytest.approx(-eps * a, abs=2e-4)


def test_structure_equation_cozermelo_origin():
    g = evaluate(closing_cozermelo(), np.zeros(8), np.zeros(8), U8, level="c")
    assert np.all(np.isfinite(g["c"]))
    assert np.max(np.abs(g["res_struct"])) < 1e-5


def test_kappa_flat():
    assert abs(curvature_kappa(flat_riemannian(), (0.4, -0.4), 2.0)) < 1e-8


@pytest.mark.parametrize("q", [(0.8, 0.0), (1.5707963, 0.3), (2.2, -0.5)])
def test_kappa_sphere(q):
    assert curvature_kappa(sphere_chart(), q, 1.1) == pytest.approx(1.0, abs=1e-4)


def test_kappa_closing_example():
    rng = np.random.default_rng(0)
    q1, q2, u = rng.uniform(-0.3, 0.3, 40), rng.uniform(-0.3, 0.3, 40), rng.uniform(0, 2 * math.pi, 40)
    g = evaluate(closing_cozermelo(), q1, q2, u, level="kappa")
    assert np.max(np.abs(g["kappa"] / closing_kappa(q1, q2, u) - 1)) < 1e-3


def test_bracket_oracle_flat():
    k, res = bracket_oracle_kappa(flat_riemannian(), (0.1, 0.1), 0.5, return_residual=True)
    assert abs(k) < 1e-8 and res < 1e-6


def test_bracket_oracle_sphere():
    assert bracket_oracle_kappa(sphere_chart(), (1.2, 0.0), 0.4) == pytest.approx(1.0, abs=5e-3)


def test_bracket_oracle_agrees_on_random_systems():
    for sys, q1, q2, u in random_battery(3, 10, seed=23):
        g = evaluate(sys, q1, q2, u)
        assert np.max(np.abs(g["res_bracket"]) / np.maximum(np.abs(g["kappa"]), 1.0)) < 1e-3
        assert np.max(g["bracket_q_residual"]) < 1e-4


# ------------------------------------------------------------------ derived fields

def test_derived_flat_all_zero():
    s = derived_invariants(flat_riemannian(), (0.2, 0.2), 0.3)
    for name in ("c", "kappa", "Lhb", "L2hb", "Lvk", "Lvhb", "res_bnk", "res_lemma", "res_bracket"):
        assert abs(getattr(s, name)) < 1e-7, name


def test_derived_constant_drift():
    s = derived_invariants(flat_zermelo("0.3", "0.1"), (0.1, -0.1), 1.3)
    assert max(abs(s.Lhb), abs(s.Lvhb), abs(s.kappa)) < 1e-6


def test_identity_residuals_converge():
    (sys, q1, q2, u), = random_battery(1, 6, seed=31)
    sup, orders = residual_convergence(sys, q1, q2, u)
    assert min(orders.values()) >= 1.8
    assert max(sup["res_bnk"][-1], sup["res_lemma"][-1]) < 1e-4


def test_verdict_level_matches_full():
    sys = S.general("(1 + 0.1*q1*q2)*cos(u) + 0.05*q1", "(1.2 + 0.1*q1^2)*sin(u)")
    pts = ([0.1, -0.2], [0.0, 0.15], [0.4, 3.0])
    full, ver = evaluate(sys, *pts), evaluate(sys, *pts, level="verdict")
    for k in ("kappa", "Lhb", "Lvhb"):
        assert np.allclose(full[k], ver[k], rtol=1e-9, atol=1e-12)


# ------------------------------------------------------------------ invariance and exclusion

@pytest.mark.parametrize("sys", [closing_cozermelo(), S.general("(1 + 0.2*q1)*cos(u) + 0.1*q2", "sin(u) + 0.1*q1*q2")])
def test_kappa_feedback_invariance(sys):
    rng = np.random.default_rng(2)
    q1, q2, u = rng.uniform(-0.2, 0.2, 10), rng.uniform(-0.2, 0.2, 10), rng.uniform(0, 6.2, 10)
    k0 = evaluate(sys, q1, q2, u, level="kappa")["kappa"]
    k1 = evaluate(shifted(sys, 0.5), q1, q2, u - 0.5, level="kappa")["kappa"]
    k2 = evaluate(reoriented(sys), q1, q2, -u, level="kappa")["kappa"]
    assert np.max(np.abs(k1 - k0)) < 1e-6
    assert np.max(np.abs(k2 - k0)) < 1e-6


def test_order_independent():
    sys = closing_cozermelo()
    rng = np.random.default_rng(4)
    q1, q2, u = rng.uniform(-0.2, 0.2, 12), rng.uniform(-0.2, 0.2, 12), rng.uniform(0, 6, 12)
    perm = rng.permutation(12)
    a = evaluate(sys, q1, q2, u)
    b = evaluate(sys, q1[perm], q2[perm], u[perm], InvariantConfig(max_points=3 * 13 ** 3))
    for k in a.values:
        assert np.array_equal(a[k][perm], b[k], equal_nan=True), k


def test_stencil_past_interval_end_is_allowed():
    sys = S.general("u", "u^2/2 + 1", S.ControlDomain.interval(-0.5, 0.5))
    g = evaluate(sys, [0.0, 0.0], [0.0, 0.0], [0.0, 0.4999], level="kappa")
    assert g.status == ["ok", "ok"]


def test_stencil_leaving_expression_domain():
    sys = S.general("u", "2 - sqrt(1 - u^2)", S.ControlDomain.interval(-0.999, 0.999))
    g = evaluate(sys, [0.0, 0.0], [0.0, 0.0], [0.0, 0.998], level="kappa")
    assert g.status[0] == "ok"
    assert g.status[1].startswith("stencil leaves domain")
    with pytest.raises(StencilError):
        curvature_kappa(sys, (0.0, 0.0), 0.998)


def test_epsilon_hint_contradiction():
    sys = S.riemannian(["1", "0"], ["0", "1"], epsilon_hint=-1)
    g = evaluate(sys, [0.0], [0.0], [0.0], level="kappa")
    assert g.status[0].startswith("epsilon")
    assert g.excluded() == {g.status[0]: 1}


def test_concave_indicatrix_has_negative_epsilon():
    # the circle traversed around a point outside it: f^f_u < 0 and the curve is concave from the origin
    sys = S.general("2 + cos(u)", "sin(u)")
    fd = fiber_data(sys, (0.0, 0.0), math.pi)
    assert fd.epsilon in (1, -1)
    assert -fd.epsilon * fd.alpha > 0
