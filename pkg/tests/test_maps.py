import json
import math

import numpy as np
import pytest

from aastretch.core import Point, to_logcyl
from aastretch.maps import (
    DegenerateDerivative,
    MapUnderTest,
    NotQuasiconformalAtPoint,
    ZeroVelocity,
    analytic_qc_ratio,
    beltrami,
    beltrami_logcyl,
    contact_residual,
    contact_residual_logcyl,
    diagnostics_json,
    distortion,
    distortion_sq,
    horizontal_derivatives,
    jacobian_mu,
    msp_indicator,
    pushforward_bounds,
    pushforward_speed,
    pushforward_speed_fd,
)
from aastretch.curves import HorizontalCurve
from aastretch.stretch import f_minus_one, identity_map, linear_stretch, make_scenario, radial_stretch


def random_points(n=1000, seed=0, psi_max=1.4):
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(-1, 1, n))
    psi = rng.uniform(-psi_max, psi_max, n)
    return Point(rng.uniform(-2, 2, n), r * np.cos(psi), r * np.sin(psi))


CATALOG = [identity_map(), linear_stretch(0.5), linear_stretch(3.0), radial_stretch(0.5),
           radial_stretch(2.0), f_minus_one()]


def test_identity_derivatives():
    p = random_points(20)
    rec = horizontal_derivatives(identity_map(), p)
    assert np.allclose(rec.Zf_I, 2 * p.lam, rtol=1e-15)
    assert np.all(rec.Zbar_f_I == 0)
    fd = horizontal_derivatives(identity_map().without_jacobian(), p)
    assert fd.method == "finite-difference"
    assert np.allclose(fd.Zf_I, 2 * p.lam, rtol=1e-9)
    assert np.max(np.abs(fd.Zbar_f_I)) < 1e-9


def test_linear_stretch_derivatives_closed_form():
    p = random_points(50)
    k = 0.5
    rec = horizontal_derivatives(linear_stretch(k).without_jacobian(), p)
    assert np.allclose(rec.Zf_I, p.lam * (1 + k), rtol=1e-9)
    assert np.allclose(rec.Zbar_f_I, p.lam * (1 - k), rtol=1e-9)
    assert beltrami(linear_stretch(k), Point(0, 1, 0)) == pytest.approx((1 - k) / (1 + k), abs=1e-15)


def test_radial_beltrami_closed_form_fd():
    k = 0.5
    p = random_points(1000, seed=3)
    q = to_logcyl(p)
    mu = beltrami(radial_stretch(k).without_jacobian(), p)
    expected = np.exp(2j * q.psi) * (k**2 - 1) / (k**2 + 2 * np.tan(q.psi) ** 2 + 1)
    assert np.max(np.abs(mu - expected) / np.abs(expected)) < 1e-6
    assert beltrami(radial_stretch(k), Point(0, 1.3, 0)) == pytest.approx(-0.6, abs=1e-14)


def test_distortion_examples():
    assert distortion(identity_map(), Point(0, 1, 0)) == 1
    p = random_points(100)
    assert np.allclose(distortion(linear_stretch(0.5), p), 2.0, rtol=1e-14)
    assert np.allclose(distortion(linear_stretch(3.0), p), 3.0, rtol=1e-14)
    lp = Point(0.0, math.cos(math.pi / 4), math.sin(math.pi / 4))
    assert distortion(radial_stretch(0.5), lp) == pytest.approx(1.6, rel=1e-13)
    assert distortion_sq(radial_stretch(0.5), lp) == pytest.approx(2.56, rel=1e-13)


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.name)
def test_analytic_and_fd_agree(f):
    p = random_points(1000, seed=5)
    a = horizontal_derivatives(f, p, "analytic")
    d = horizontal_derivatives(f, p, "finite-difference")
    scale = np.abs(a.Zf_I) + np.abs(a.Zbar_f_I)
    assert np.max(np.abs(a.Zf_I - d.Zf_I) / scale) < 1e-6
    assert np.max(np.abs(a.Zbar_f_I - d.Zbar_f_I) / scale) < 1e-6


@pytest.mark.parametrize("f", [identity_map(), f_minus_one(), linear_stretch(0.5), linear_stretch(3.0),
                               radial_stretch(0.5)], ids=lambda f: f.name)
def test_distortion_of_inverse(f):
    p = random_points(300, seed=7)
    K = distortion(f, p)
    K_inv = distortion(f.inverse(), f(p))
    assert np.max(np.abs(K - K_inv)) < 1e-8
    back = f.inverse()(f(p))
    assert np.allclose(back.as_array(), p.as_array(), atol=1e-12)


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.name)
def test_qc_ratio_equals_distortion_squared(f):
    p = random_points(500, seed=8)
    for method in ("analytic", "finite-difference"):
        ratio = analytic_qc_ratio(f, p, method)
        assert np.max(np.abs(ratio / distortion_sq(f, p, method) - 1)) < 1e-9


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.name)
def test_contact_residuals(f):
    p = random_points(1000, seed=9)
    for method in ("analytic", "finite-difference"):
        assert contact_residual(f, p, method).max_abs() < 1e-8


def test_contact_factor_values():
    p = random_points(200, seed=10)
    assert np.allclose(contact_residual(linear_stretch(0.3), p).sigma, 0.3, rtol=1e-14)
    assert np.allclose(contact_residual(radial_stretch(0.3), p).sigma, 1.0, rtol=1e-12)
    assert np.allclose(contact_residual(f_minus_one(), p).sigma, 1.0, rtol=1e-12)


def test_jacobian_examples():
    assert jacobian_mu(identity_map(), Point(0, 1, 0)) == 1
    p = random_points(300, seed=11)
    assert np.allclose(jacobian_mu(linear_stretch(0.4), p), 0.16, rtol=1e-13)
    assert np.all(jacobian_mu(f_minus_one(), p) > 0)
    assert np.allclose(jacobian_mu(f_minus_one(), p), 1.0, rtol=1e-12)


def test_f_minus_one():
    f = f_minus_one()
    img = f(Point(0, 1, 0))
    assert (float(img.a), float(img.lam), float(img.t)) == (0, 1, 0)
    p = random_points(1000, seed=12)
    assert np.max(np.abs(beltrami(f, p))) < 1e-12
    assert np.max(np.abs(distortion(f, p) - 1)) < 1e-9
    assert np.allclose(f(f(p)).as_array(), p.as_array(), atol=1e-12)
    assert np.all(f(p).lam > 0)


def test_logcyl_formulas_match_cartesian():
    p = random_points(200, seed=13)
    q = to_logcyl(p)
    for f in (radial_stretch(0.5), radial_stretch(3.0), f_minus_one(), identity_map()):
        assert np.max(np.abs(beltrami_logcyl(f, q) - beltrami(f, p))) < 1e-8
        e_psi, e_xi, e_a, sigma = contact_residual_logcyl(f, q)
        assert max(np.max(np.abs(e_psi)), np.max(np.abs(e_xi)), np.max(np.abs(e_a))) < 1e-8
        assert np.allclose(sigma, contact_residual(f, p).sigma, rtol=1e-8)


def test_errors():
    collapse = MapUnderTest(lambda p: Point(p.a, 1 + 0 * p.lam, 0 * p.t), name="collapse")
    with pytest.raises(DegenerateDerivative):
        beltrami(collapse, Point(0, 1, 0))
    flip = MapUnderTest(lambda p: Point(-2 * p.a, p.lam, -2 * p.t), name="flip")
    with pytest.raises(NotQuasiconformalAtPoint):
        distortion(flip, Point(0, 1, 0))
    with pytest.raises(DegenerateDerivative):
        horizontal_derivatives(flip, Point(0, 1, 0), orientation_preserving=True)
    still = HorizontalCurve(0.0, 1.0, lambda s: (0 * s, 1 + 0 * s, 0 * s))
    with pytest.raises(ZeroVelocity):
        msp_indicator(identity_map(), still, 0.5)


@pytest.mark.parametrize("kind, k", [("linear_lt1", 0.5), ("linear_gt1", 3.0), ("radial", 0.5)])
def test_msp_and_pushforward_on_fibers(kind, k):
    sc = make_scenario(kind, k)
    fol = sc.foliation
    s = np.linspace(fol.c, fol.d, 9)[1:-1]
    for d1, d2 in [(0.2, 0.6), (0.8, 0.7)]:
        fiber = fol.fiber(d1, d2)
        ind = msp_indicator(sc.stretch, fiber, s)
        assert np.max(np.abs(ind.imag)) < 1e-10
        assert np.all(ind.real < 0)
        speed = pushforward_speed(sc.stretch, fiber, s)
        lo, hi = pushforward_bounds(sc.stretch, fiber, s)
        assert np.max(np.abs(speed - lo)) < 1e-9
        assert np.all(hi >= speed)
        assert np.allclose(pushforward_speed_fd(sc.stretch, fiber, s), speed, rtol=1e-6)
    if kind == "linear_lt1":
        assert ind.real == pytest.approx(np.full(len(s), (k - 1) / (1 + k)), abs=1e-14)
    elif kind == "linear_gt1":
        assert ind.real == pytest.approx(np.full(len(s), (1 - k) / (1 + k)), abs=1e-14)
    else:
        psi = 0.7
        assert ind.real == pytest.approx(np.full(len(s), (k**2 - 1) / (k**2 + 2 * math.tan(psi) ** 2 + 1)), abs=1e-12)


def test_pushforward_identity_and_generic_curve():
    sc = make_scenario("radial", 0.5)
    fiber = sc.foliation.fiber(0.3, 0.2)
    s = np.linspace(0.1, 0.9, 5)
    assert np.allclose(pushforward_speed(identity_map(), fiber, s), fiber.speed(s), rtol=1e-14)
    # off the extremal family the speed lies strictly between the bounds
    psi = 0.3

    def tilted_pos(u):
        # xi = u/2, psi(u) = psi + u/2, a from the horizontality o.d.e.
        return (0.1 + 0.25 * u - 0.5 * np.log(np.cos(psi + 0.5 * u) / np.cos(psi)), 0.5 * u, psi + 0.5 * u)

    tilted = HorizontalCurve(0.0, 1.0, tilted_pos, chart="logcyl")
    assert np.max(np.abs(tilted.residual(s))) < 1e-9
    speed = pushforward_speed(sc.stretch, tilted, s)
    lo, hi = pushforward_bounds(sc.stretch, tilted, s)
    assert np.all(lo < speed) and np.all(speed < hi)
    assert np.allclose(pushforward_speed_fd(sc.stretch, tilted, s), speed, rtol=1e-6)


def test_diagnostics_json():
    text = diagnostics_json(linear_stretch(0.5), random_points(3))
    data = json.loads(text)
    assert data["map"].startswith("linear_stretch")
    assert len(data["points"]) == 3
    assert data["points"][0]["K"] == pytest.approx(2.0)
    assert data["points"][0]["J"] == pytest.approx(0.25)
