import math

import numpy as np
import pytest

from ctrlcurv import systems as S
from ctrlcurv.flows import extremal_flow, zermelo_closed_flow

FLAT = S.FramePair.flat()
HYPERBOLIC = S.FramePair.of(["q2", "0"], ["0", "q2"])
SPHERE = S.FramePair.of(["1", "0"], ["0", "1/sin(q1)"])


def test_riemannian_velocity_at_zero():
    f1, f2 = S.velocity_jet(S.riemannian(["1", "0"], ["0", "1"]), (0.3, -0.2), 0.0)
    assert (f1.value, f2.value) == pytest.approx((1.0, 0.0))
    assert (f1.du, f2.du) == pytest.approx((0.0, 1.0))


def test_zermelo_velocity_adds_drift():
    f1, f2 = S.velocity_jet(S.zermelo(["1", "0"], ["0", "1"], "0.5", "0"), (0.0, 0.0), math.pi / 2)
    assert (f1.value, f2.value) == pytest.approx((0.5, 1.0))


@pytest.mark.parametrize("u", np.linspace(0, 2 * math.pi, 7))
def test_cozermelo_velocity_at_origin(u):
    sys = S.cozermelo(["1", "0"], ["0", "1"], "2*q1", "2*q2")
    f1, f2 = S.velocity_jet(sys, (0.0, 0.0), u)
    assert (f1.value, f2.value) == pytest.approx((math.cos(u), math.sin(u)), abs=1e-15)


def test_cozermelo_navigation_violation():
    sys = S.cozermelo(["1", "0"], ["0", "1"], "2*q1", "2*q2")
    with pytest.raises(S.NavigationConditionError):
        S.velocity_jet(sys, (0.6, 0.0), math.pi)


def test_zermelo_navigation_violation():
    sys = S.zermelo(["1", "0"], ["0", "1"], "q1", "0")
    S.velocity_jet(sys, (0.5, 0.0), 0.0)
    with pytest.raises(S.NavigationConditionError):
        S.velocity_jet(sys, (1.2, 0.0), 0.0)
    assert sys.jets(np.array([0.5, 1.2]), 0.0, 0.0).bad.tolist() == [False, True]


def test_velocity_domain_error_propagates():
    from ctrlcurv.expr import ExprDomainError

    with pytest.raises(ExprDomainError):
        S.velocity_jet(S.general("log(q1)*cos(u)", "sin(u)"), (-1.0, 0.0), 0.0)


def test_structure_constants_flat():
    assert S.frame_structure_constants(FLAT, 0.2, 0.4) == pytest.approx((0.0, 0.0))


def test_structure_constants_hyperbolic():
    # [e1, e2] = -q2 d/dq1 = -e1 at q2 = 1; convention [e1, e2] = -(c1 e1 + c2 e2)
    assert S.frame_bracket_coefficients(HYPERBOLIC, 0.0, 1.0) == pytest.approx((-1.0, 0.0))
    assert S.frame_structure_constants(HYPERBOLIC, 0.0, 1.0) == pytest.approx((1.0, 0.0))


def test_structure_constants_sphere_equator():
    assert S.frame_structure_constants(SPHERE, math.pi / 2, 0.3) == pytest.approx((0.0, 0.0), abs=1e-15)


def test_singular_frame():
    with pytest.raises(S.SingularFrameError):
        S.frame_structure_constants(S.FramePair.of(["1", "0"], ["q1", "0"]), 0.0, 0.0)


def _zd(X1, X2, frame=FLAT):
    return S.zermelo(frame, None, X1, X2).zermelo


def test_cZ_constant_drift_vanishes():
    u = np.linspace(0, 2 * math.pi, 9)
    for q in [(0.0, 0.0), (0.4, -0.3)]:
        assert np.max(np.abs(S.zermelo_cZ(_zd("0.3", "-0.2"), q[0], q[1], u))) == 0.0


def test_cZ_zero_drift_is_frame_term():
    u = np.linspace(0, 2 * math.pi, 9)
    c1, c2 = S.frame_structure_constants(HYPERBOLIC, 0.1, 1.3)
    got = S.zermelo_cZ(_zd("0", "0", HYPERBOLIC), 0.1, 1.3, u)
    assert np.allclose(got, c1 * np.cos(u) + c2 * np.sin(u), atol=1e-15)


def test_cZ_shear_drift_at_zero():
    assert S.zermelo_cZ(_zd("q2", "0"), 0.2, 0.1, 0.0) == pytest.approx(1.0)


def test_cZ_zero_drift_flat_grid():
    q1, q2, u = np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5), np.linspace(0, 6, 8))
    assert np.all(S.zermelo_cZ(_zd("0", "0"), q1, q2, u) == 0.0)


def test_cZ_sign_calibrated_on_hyperbolic_geodesics():
    sys = S.zermelo(HYPERBOLIC, None, "0", "0")
    a = extremal_flow(sys, (0.0, 1.0), 0.7, 1.0)
    b = zermelo_closed_flow(sys, (0.0, 1.0), 0.7, 1.0)
    ta = np.interp(b.t, a.t, a.q[:, 0])
    assert a.status == b.status == "ok"
    assert np.max(np.abs(ta - b.q[:, 0])) < 1e-6


def _coz(y1, y2, frame=FLAT):
    return S.cozermelo(frame, None, y1, y2).cozermelo


def test_cozermelo_hamiltonian_reduces_to_norm():
    assert S.cozermelo_hamiltonian(_coz("0", "0"), 0.1, 0.2, 3.0, 4.0) == pytest.approx(5.0)


def test_cozermelo_hamiltonian_aligned():
    a = 0.4
    assert S.cozermelo_hamiltonian(_coz(str(a), "0"), 0.0, 0.0, 1.0, 0.0) == pytest.approx(1 / (1 + a))


def test_cozermelo_hamiltonian_homogeneous():
    d = _coz("0.2*q1", "0.3")
    h1 = S.cozermelo_hamiltonian(d, 0.5, 0.1, 0.3, -0.7)
    assert S.cozermelo_hamiltonian(d, 0.5, 0.1, 0.6, -1.4) == pytest.approx(2 * h1)


def test_cozermelo_kappa_closing_example():
    d = _coz("2*q1", "2*q2")
    rng = np.random.default_rng(3)
    q1, q2, u = rng.uniform(-0.25, 0.25, 30), rng.uniform(-0.25, 0.25, 30), rng.uniform(0, 6.28, 30)
    want = 3 / (1 + 2 * q1 * np.cos(u) + 2 * q2 * np.sin(u)) ** 4
    assert np.max(np.abs(S.cozermelo_kappa_closed(d, q1, q2, u) / want - 1)) < 1e-6


def test_cozermelo_kappa_at_origin():
    u = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    assert np.allclose(S.cozermelo_kappa_closed(_coz("2*q1", "2*q2"), 0.0, 0.0, u), 3.0, rtol=1e-8)


def test_cozermelo_kappa_flat_riemannian():
    assert abs(S.cozermelo_kappa_closed(_coz("0", "0"), 0.3, 0.1, 1.0)) < 1e-10


@pytest.mark.parametrize("frame, q, K", [(SPHERE, (1.1, 0.2), 1.0), (HYPERBOLIC, (0.0, 1.2), -1.0),
                                         (FLAT, (0.3, 0.3), 0.0)])
def test_cozermelo_zero_ups_is_gaussian_curvature(frame, q, K):
    assert S.gaussian_curvature(frame, *q) == pytest.approx(K, abs=1e-6)
    got = S.cozermelo_kappa_closed(_coz("0", "0", frame), q[0], q[1], np.array([0.0, 1.0, 2.5]))
    assert np.allclose(got, K, atol=1e-6)


def test_interval_samples_are_midpoints():
    d = S.ControlDomain.interval(-1.0, 1.0)
    assert np.allclose(d.samples(4), [-0.75, -0.25, 0.25, 0.75])
    with pytest.raises(ValueError):
        S.ControlDomain.interval(1.0, 1.0)


def test_drift_coordinates_to_frame():
    X = S.drift_frame_components(HYPERBOLIC, "0.5*q2", "0")
    sys = S.zermelo(HYPERBOLIC, None, *X)
    f1, f2 = S.velocity_jet(sys, (0.0, 2.0), math.pi / 2)
    assert (f1.value, f2.value) == pytest.approx((1.0, 2.0))
