"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

Run with ``pytest tests/test_acceptance.py -s`` or directly as a script.
"""
import math
import sys
import time

import numpy as np
import pytest

from aastretch.core import Point, to_logcyl
from aastretch.maps import (
    beltrami,
    contact_residual,
    distortion,
    msp_indicator,
    pushforward_bounds,
    pushforward_speed,
)
from aastretch.modulus import (
    build_problem,
    change_of_variables,
    check_admissibility,
    discrete_modulus,
    extremal_density_modulus,
    image_family_modulus,
    mean_distortion,
    radial_image_modulus,
)
from aastretch.stretch import f_minus_one, linear_stretch, make_scenario, radial_stretch, sample_connecting_family
from aastretch.verify import open_question_report

# pinned tolerances
QUAD_RTOL = 1e-10
DISCRETE_RTOL = 0.05
RUNTIME_LIMIT_S = 60.0
PUBLISHED_RTOL = 1e-4  # for figures quoted to five significant digits
FD_RTOL = 1e-6
IDENTITY_RTOL = 1e-8
CONTACT_TOL = 1e-8
CONFORMAL_TOL = 1e-9
MSP_IMAG_TOL = 1e-10
PUSHFORWARD_TOL = 1e-9
ADMISSIBILITY_TOL = 1e-8
CHANGE_OF_VARIABLES_RTOL = 1e-6
FEASIBILITY_TOL = 1e-9
MONOTONE_RTOL = 1e-6

N_POINTS = 1000
N_CURVES = 1000
PERTURBATION = 0.5
SCENARIOS = [("linear_lt1", 0.5), ("linear_gt1", 3.0), ("radial", 0.5)]


def report(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    return passed, line


def random_points(n=N_POINTS, seed=2024, psi_max=1.45):
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(-1.5, 1.5, n))
    psi = rng.uniform(-psi_max, psi_max, n)
    return Point(rng.uniform(-3, 3, n), r * np.cos(psi), r * np.sin(psi))


def _discrete(sc, grid=32, curves=500):
    fam = sample_connecting_family(sc, curves, 0.0)
    return discrete_modulus(build_problem(sc.foliation, fam, grid))


def criterion_1():
    start = time.perf_counter()
    sc = make_scenario("linear_lt1", 0.5)
    closed = sc.mod_gamma0
    _, quad = extremal_density_modulus(sc.foliation)
    res = _discrete(sc)
    elapsed = time.perf_counter() - start
    rel = abs(res.value / closed - 1)
    ok = (closed == 14 / 3 and abs(quad / closed - 1) <= QUAD_RTOL and rel <= DISCRETE_RTOL
          and res.max_violation <= FEASIBILITY_TOL and elapsed < RUNTIME_LIMIT_S)
    return report(1, ok, f"closed={closed:.12g} quad={quad:.12g} discrete={res.value:.6g} "
                         f"(rel {rel:.2e}, grid {res.grid}) time={elapsed:.1f}s")


def criterion_2():
    published = 2**5 / (3**3 * (2 ** (1 / 3) - 1))
    sc = make_scenario("linear_gt1", 3.0)
    closed = sc.mod_gamma0
    _, quad = extremal_density_modulus(sc.foliation)
    res = _discrete(sc)
    ok = (abs(closed / published - 1) <= PUBLISHED_RTOL and abs(quad / published - 1) <= QUAD_RTOL
          and abs(res.value / published - 1) <= DISCRETE_RTOL)
    return report(2, ok, f"target={published:.6g} closed={closed:.12g} quad={quad:.12g} "
                         f"discrete={res.value:.6g} (rel to closed {abs(res.value / closed - 1):.2e})")


def criterion_3():
    sc = make_scenario("radial", 0.5, math.e, math.pi / 4)
    _, quad = extremal_density_modulus(sc.foliation)
    target = 2 * math.pi + 4
    ok = abs(quad / target - 1) <= QUAD_RTOL and abs(sc.mod_gamma0 / target - 1) <= QUAD_RTOL
    return report(3, ok, f"quad={quad:.15g} formula={sc.mod_gamma0:.15g} target={target:.15g}")


def criterion_4():
    p = random_points()
    k = 0.5
    worst = 0.0
    for kk, expected in ((k, (1 - k) / (1 + k)), (3.0, (1 - 3.0) / (1 + 3.0))):
        mu = beltrami(linear_stretch(kk).without_jacobian(), p)
        worst = max(worst, float(np.max(np.abs(mu - expected) / abs(expected))))
    q = to_logcyl(p)
    f = radial_stretch(k).without_jacobian()
    mu = beltrami(f, p)
    mu_exact = np.exp(2j * q.psi) * (k**2 - 1) / (k**2 + 2 * np.tan(q.psi) ** 2 + 1)
    worst_mu = float(np.max(np.abs(mu - mu_exact) / np.abs(mu_exact)))
    K = distortion(f, p)
    K_exact = 1 / (k**2 * np.cos(q.psi) ** 2 + np.sin(q.psi) ** 2)
    worst_K = float(np.max(np.abs(K / K_exact - 1)))
    ok = max(worst, worst_mu, worst_K) <= FD_RTOL
    return report(4, ok, f"linear mu {worst:.2e}, radial mu {worst_mu:.2e}, radial K {worst_K:.2e} "
                         f"(tol {FD_RTOL:g}, {N_POINTS} points)")


def criterion_5():
    parts, ok = [], True
    for kind, k in SCENARIOS:
        sc = make_scenario(kind, k)
        md = mean_distortion(sc.stretch, sc.rho0, sc.foliation)
        imf = image_family_modulus(sc.stretch, sc.foliation)
        rel = abs(md / imf - 1)
        ok &= rel <= IDENTITY_RTOL
        parts.append(f"{kind} {rel:.1e}")
    sc = make_scenario("radial", 0.5, math.e, math.pi / 4)
    imf = image_family_modulus(sc.stretch, sc.foliation)
    closed = radial_image_modulus(0.5, math.e, math.pi / 4)
    rel = abs(imf / closed - 1)
    ok &= rel <= IDENTITY_RTOL
    return report(5, ok, f"identity {', '.join(parts)}; radial image {imf:.10g} vs {closed:.10g} ({rel:.1e})")


def criterion_6():
    rep = open_question_report(0.5, math.e, math.pi / 3, grid=99)
    v = rep.values
    ok = (rep.passed and abs(v["ratio"] - 8.4109) <= PUBLISHED_RTOL * 8.4109
          and v["ratio"] <= v["bound"] < v["K2"] and v["min_difference"] > 0)
    return report(6, ok, f"ratio={v['ratio']:.6g} <= {v['bound']:.6g} < {v['K2']:.6g}; "
                         f"min diff {v['min_difference']:.3e} on 99 points")


def criterion_7():
    p = random_points()
    worst = 0.0
    for f in (linear_stretch(0.5), linear_stretch(3.0), radial_stretch(0.5), f_minus_one()):
        for method in ("analytic", "finite-difference"):
            worst = max(worst, contact_residual(f, p, method).max_abs())
    g = f_minus_one()
    K_dev = float(np.max(np.abs(distortion(g, p) - 1)))
    s_dev = float(np.max(np.abs(contact_residual(g, p).sigma - 1)))
    ok = worst < CONTACT_TOL and K_dev <= CONFORMAL_TOL and s_dev <= CONFORMAL_TOL
    return report(7, ok, f"max contact residual {worst:.2e}; inversion |K-1| {K_dev:.1e}, |sigma-1| {s_dev:.1e}")


def criterion_8():
    worst_real, worst_imag, worst_push, ok = -math.inf, 0.0, 0.0, True
    for kind, k in SCENARIOS:
        sc = make_scenario(kind, k)
        fol = sc.foliation
        (l1, h1), (l2, h2) = fol.delta_bounds
        s = np.linspace(fol.c, fol.d, 11)[1:-1]
        for d1 in np.linspace(l1, h1, 11)[1:-1]:
            for d2 in np.linspace(l2, h2, 11)[1:-1]:
                fiber = fol.fiber(d1, d2)
                ind = msp_indicator(sc.stretch, fiber, s)
                speed = pushforward_speed(sc.stretch, fiber, s)
                lo, _ = pushforward_bounds(sc.stretch, fiber, s)
                worst_real = max(worst_real, float(ind.real.max()))
                worst_imag = max(worst_imag, float(np.abs(ind.imag).max()))
                worst_push = max(worst_push, float(np.abs(speed - lo).max()))
    ok = worst_real < 0 and worst_imag < MSP_IMAG_TOL and worst_push <= PUSHFORWARD_TOL
    return report(8, ok, f"max Re {worst_real:.3g}, max |Im| {worst_imag:.1e}, "
                         f"pushforward gap {worst_push:.1e} over 3x81 fibers")


def criterion_9():
    parts, ok = [], True
    for kind, k in SCENARIOS:
        sc = make_scenario(kind, k)
        curves = sample_connecting_family(sc, N_CURVES, PERTURBATION, seed=99)
        rep = check_admissibility(sc.rho0, curves, tol=ADMISSIBILITY_TOL)
        ok &= rep.min_integral >= 1 - ADMISSIBILITY_TOL
        parts.append(f"{kind} min {rep.min_integral:.10f}")
    return report(9, ok, f"{N_CURVES} curves each: " + ", ".join(parts))


def criterion_10():
    sc = make_scenario("radial", 0.5)
    centre = sc.stretch(sc.foliation.curve_map(0.5, 0.5, 0.4))
    sig = 0.05

    def u(p):
        return np.exp(-((p.a - centre.a) ** 2 + (p.lam - centre.lam) ** 2 + (p.t - centre.t) ** 2) / sig**2)

    box = [(float(c) - 8 * sig, float(c) + 8 * sig) for c in (centre.a, centre.lam, centre.t)]
    lhs, rhs = change_of_variables(sc.stretch, u, sc.foliation, box)
    rel = abs(lhs / rhs - 1)
    return report(10, rel <= CHANGE_OF_VARIABLES_RTOL, f"pullback {lhs:.12g} image {rhs:.12g} (rel {rel:.1e})")


def criterion_11():
    worst_violation, monotone = 0.0, True
    parts = []
    for kind, k in SCENARIOS:
        sc = make_scenario(kind, k)
        fam = sample_connecting_family(sc, 256, 0.3, seed=5)
        problem = build_problem(sc.foliation, fam, 16)
        values = []
        for n in (32, 64, 128, 256):
            res = discrete_modulus(problem.subproblem(slice(0, n)))
            worst_violation = max(worst_violation, res.max_violation)
            values.append(res.value)
        monotone &= all(b >= a * (1 - MONOTONE_RTOL) for a, b in zip(values, values[1:]))
        parts.append(f"{kind} " + "<=".join(f"{v:.4g}" for v in values))
    ok = monotone and worst_violation <= FEASIBILITY_TOL
    return report(11, ok, f"{'; '.join(parts)}; max violation {worst_violation:.1e}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion, capsys):
    passed, line = criterion()
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    failures = 0
    for crit in CRITERIA:
        passed, line = crit()
        print(line, flush=True)
        failures += not passed
    sys.exit(1 if failures else 0)
