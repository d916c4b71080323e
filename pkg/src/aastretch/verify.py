"""Scenario drivers that turn the extremality statements into numerical reports.

A report is a list of checks.  Each check records the measured quantity, the
reference it is compared with, the signed slack (nonnegative means the check
holds) and the tolerance used.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Point
from .curves import Density
from .maps import contact_residual, msp_indicator
from .modulus import (
    build_problem,
    check_admissibility,
    check_fiber_constant_distortion,
    discrete_modulus,
    extremal_density_modulus,
    image_family_modulus,
    max_distortion,
    mean_distortion,
    open_question_function,
    quasi_invariance_check,
    radial_image_modulus,
)
from .stretch import Scenario, make_scenario, sample_connecting_family

PROFILES = {
    "strict": {
        "points": 1000,
        "curves": 1000,
        "perturbation": 0.3,
        "contact_tol": 1e-8,
        "admissibility_tol": 1e-8,
        "identity_rtol": 1e-8,
        "msp_imag_tol": 1e-10,
        "msp_formula_tol": 1e-9,
        "fiber_constant_tol": 1e-9,
        "quasi_invariance_slack": 1e-9,
        "monotone_grid": 16,
        "monotone_curves": (64, 256),
    },
    "fast": {
        "points": 100,
        "curves": 60,
        "perturbation": 0.3,
        "contact_tol": 1e-8,
        "admissibility_tol": 1e-8,
        "identity_rtol": 1e-8,
        "msp_imag_tol": 1e-10,
        "msp_formula_tol": 1e-9,
        "fiber_constant_tol": 1e-9,
        "quasi_invariance_slack": 1e-9,
        "monotone_grid": 8,
        "monotone_curves": (16, 64),
    },
}


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    reference: Optional[float]
    slack: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "reference": self.reference,
                "slack": self.slack, "tolerance": self.tolerance, "passed": self.passed}


def _le(name, value, bound, tol=0.0):
    """``value <= bound`` up to ``tol``."""
    slack = float(bound - value)
    return Check(name, float(value), float(bound), slack, tol, bool(slack >= -tol))


def _close(name, value, reference, rtol):
    err = abs(value - reference) / max(abs(reference), 1e-300)
    return Check(name, float(value), float(reference), float(rtol - err), rtol, bool(err <= rtol))


@dataclass
class TheoremReport:
    scenario: dict
    checks: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "passed": self.passed, "values": self.values,
                "checks": [c.to_dict() for c in self.checks]}


def _random_domain_points(sc: Scenario, n: int, seed: int) -> Point:
    rng = np.random.default_rng(seed)
    params = [lo + (hi - lo) * rng.uniform(0.001, 0.999, n) for lo, hi in sc.foliation.bounds]
    return sc.foliation.curve_map(*params)


def _density_battery(sc: Scenario) -> list[Density]:
    """Admissible densities: ``c rho0`` for ``c >= 1`` and ``rho0`` plus Gaussian bumps."""
    fol = sc.foliation
    centre = fol.curve_map(*[0.5 * (lo + hi) for lo, hi in fol.bounds])
    rho0 = sc.rho0
    battery = [rho0, rho0.scaled(1.25), rho0.scaled(2.0)]
    for height, width in ((0.5, 0.2), (2.0, 0.1)):
        def bump(p, h=height, wd=width):
            d2 = (p.a - centre.a) ** 2 + (p.lam - centre.lam) ** 2 + (p.t - centre.t) ** 2
            return h * np.exp(-d2 / wd**2)

        battery.append(rho0 + Density(bump, label=f"bump({height:g},{width:g})"))
    return battery


def _common_checks(sc: Scenario, report: TheoremReport, tol: dict, seed: int) -> None:
    f, fol = sc.stretch, sc.foliation
    p = _random_domain_points(sc, tol["points"], seed)

    res = contact_residual(f, p)
    report.checks.append(_le("contact_residual", res.max_abs(), tol["contact_tol"]))

    spread = check_fiber_constant_distortion(f, fol)
    report.checks.append(_le("distortion_fiber_spread", spread, tol["fiber_constant_tol"]))

    curves = sample_connecting_family(sc, tol["curves"], tol["perturbation"], seed=seed)
    adm = check_admissibility(sc.rho0, curves, tol["admissibility_tol"])
    report.checks.append(_le("admissibility_min_integral", -adm.min_integral, -1.0,
                             tol["admissibility_tol"]))

    _, mod_quad = extremal_density_modulus(fol)
    report.values["mod_gamma0"] = sc.mod_gamma0
    report.values["mod_gamma0_quadrature"] = mod_quad
    report.checks.append(_close("mod_gamma0_quadrature", mod_quad, sc.mod_gamma0, 1e-10))

    K_f = max_distortion(f, fol)
    md = mean_distortion(f, sc.rho0, fol)
    imf = image_family_modulus(f, fol)
    report.values.update(K_f=K_f, mean_distortion=md, image_family_modulus=imf)
    report.checks.append(_close("image_modulus_identity", md, imf, tol["identity_rtol"]))

    qi = quasi_invariance_check(K_f, sc.mod_gamma0, imf, tol["quasi_invariance_slack"])
    report.values["quasi_invariance"] = qi.to_dict()
    report.checks.append(Check("quasi_invariance", imf, None, min(qi.lower_slack, qi.upper_slack),
                               tol["quasi_invariance_slack"], qi.passed))

    worst = math.inf
    for rho in _density_battery(sc):
        worst = min(worst, mean_distortion(f, rho, fol, rtol=1e-10) - imf)
    report.checks.append(Check("mean_distortion_lower_bound", imf, None, float(worst),
                               tol["quasi_invariance_slack"], bool(worst >= -1e-9 * imf)))

    grid = tol["monotone_grid"]
    small, large = tol["monotone_curves"]
    family = sample_connecting_family(sc, large, tol["perturbation"], seed=seed + 1)
    problem = build_problem(fol, family, (grid, grid, grid))
    sub = discrete_modulus(problem.subproblem(slice(0, small)))
    full = discrete_modulus(problem)
    report.values["discrete_nested"] = [sub.value, full.value]
    report.checks.append(_le("discrete_monotone", sub.value, full.value * (1 + 1e-6)))
    report.checks.append(_le("discrete_feasibility", max(sub.max_violation, full.max_violation), 1e-9))


def _msp_checks(sc: Scenario, report: TheoremReport, tol: dict, expected) -> None:
    """Indicator along sampled fibers: real, negative, and equal to ``expected(psi)``."""
    fol = sc.foliation
    (l1, h1), (l2, h2) = fol.delta_bounds
    worst_imag, worst_real, worst_formula = 0.0, -math.inf, 0.0
    s = np.linspace(fol.c, fol.d, 11)[1:-1]
    for d1 in np.linspace(l1, h1, 7)[1:-1]:
        for d2 in np.linspace(l2, h2, 7)[1:-1]:
            fiber = fol.fiber(d1, d2)
            ind = msp_indicator(sc.stretch, fiber, s)
            worst_imag = max(worst_imag, float(np.max(np.abs(ind.imag))))
            worst_real = max(worst_real, float(np.max(ind.real)))
            worst_formula = max(worst_formula, float(np.max(np.abs(ind.real - expected(d2)))))
    report.checks.append(_le("msp_imaginary", worst_imag, tol["msp_imag_tol"]))
    if sc.k != 1:
        report.checks.append(Check("msp_real_negative", worst_real, 0.0, -worst_real, 0.0,
                                   bool(worst_real < 0)))
    report.checks.append(_le("msp_formula", worst_formula, tol["msp_formula_tol"]))


def verify_linear(k: float, kind: str, profile: str = "strict", seed: int = 0,
                  tolerances: Optional[dict] = None) -> TheoremReport:
    tol = {**PROFILES[profile], **(tolerances or {})}
    sc = make_scenario(kind, k)
    report = TheoremReport(sc.describe())
    K_exact = max(k, 1.0 / k)
    mu_line = (k - 1) / (1 + k) if sc.kind == "linear_k_lt_1" else (1 - k) / (1 + k)
    _msp_checks(sc, report, tol, lambda d2: mu_line)
    _common_checks(sc, report, tol, seed)
    report.values["K_f_exact"] = K_exact
    report.values["K2_mod_gamma0"] = K_exact**2 * sc.mod_gamma0
    report.checks.append(_close("mean_distortion_closed_form", report.values["mean_distortion"],
                                K_exact**2 * sc.mod_gamma0, tol["identity_rtol"]))
    return report


def verify_radial(k: float, r0: float = math.e, psi0: float = math.pi / 4,
                  profile: str = "strict", seed: int = 0,
                  tolerances: Optional[dict] = None) -> TheoremReport:
    tol = {**PROFILES[profile], **(tolerances or {})}
    sc = make_scenario("radial", k, r0, psi0)
    report = TheoremReport(sc.describe())
    _msp_checks(sc, report, tol,
                lambda psi: (k**2 - 1) / (k**2 + 2 * np.tan(psi) ** 2 + 1))
    _common_checks(sc, report, tol, seed)
    closed = radial_image_modulus(k, r0, psi0)
    report.values["image_modulus_closed_form"] = closed
    report.values["K_f_exact"] = 1.0 / k**2
    report.checks.append(_close("image_modulus_closed_form", report.values["image_family_modulus"],
                                closed, tol["identity_rtol"]))
    return report


@dataclass
class OQReport:
    parameters: dict
    values: dict
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"scenario": self.parameters, "passed": self.passed, "values": self.values,
                "checks": [c.to_dict() for c in self.checks]}


def open_question_report(k: float, r0: float = math.e, psi0: float = math.pi / 3,
                         grid: int = 99) -> OQReport:
    """Modulus ratio of the radial image family against ``k^{-7/2}`` and ``k^{-4}``,
    plus monotonicity of the normalised image modulus in ``k``."""
    sc = make_scenario("radial", k, r0, psi0)
    mod = sc.mod_gamma0
    mod_f = radial_image_modulus(k, r0, psi0)
    mod_f_quad = image_family_modulus(sc.stretch, sc.foliation)
    ratio = mod_f / mod
    bound, K2 = k ** -3.5, k ** -4.0
    ks = np.linspace(0.01, 0.99, grid)
    h = open_question_function(ks, psi0)
    diffs = np.diff(h)
    cap = psi0 + math.sin(psi0) * math.cos(psi0)
    values = {"mod_gamma": mod, "mod_f_gamma": mod_f, "mod_f_gamma_quadrature": mod_f_quad,
              "ratio": ratio, "bound": bound, "K2": K2, "min_difference": float(diffs.min()),
              "max_h": float(h.max()), "h_cap": cap}
    checks = [
        _close("image_modulus_quadrature", mod_f_quad, mod_f, 1e-8),
        _le("ratio_below_bound", ratio, bound, 1e-12 * bound),
        _le("bound_below_K2", bound, K2),
        Check("monotone", float(diffs.min()), 0.0, float(diffs.min()), 0.0, bool(diffs.min() > 0)),
        _le("h_below_cap", float(h.max()), cap),
    ]
    return OQReport({"k": k, "r0": r0, "psi0": psi0, "grid": grid}, values, checks)


def reports_to_csv(reports, fh) -> None:
    """One row per report: parameters, pass flag and scalar values."""
    rows = []
    for rep in reports:
        d = rep.to_dict()
        row = {**d["scenario"], "passed": d["passed"]}
        row.update({k: v for k, v in d["values"].items() if isinstance(v, (int, float))})
        rows.append(row)
    keys = sorted({k for r in rows for k in r})
    writer = csv.DictWriter(fh, fieldnames=keys)
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
