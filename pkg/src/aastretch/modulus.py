"""4-modulus engine.

Closed-form values for foliated families, admissibility checks, the mean
distortion functional, and a discrete solver for

    minimise  sum_cells w_c rho_c^4   subject to  A rho >= 1,  rho >= 0,

where row ``j`` of ``A`` holds the horizontal length of curve ``j`` inside each
cell and ``w_c`` is the Haar measure of cell ``c``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sparse

from .core import Point
from .curves import Density, Foliation, HorizontalCurve, foliation_volume_residual, line_integral
from .maps import MapUnderTest, distortion, jacobian_mu, msp_indicator
from .quadrature import box_rule, integrate_box

FOLIATION_TOL = 1e-6
ADMISSIBILITY_TOL = 1e-8
MSP_IMAG_TOL = 1e-10
FIBER_CONSTANT_TOL = 1e-9
MIN_SEGMENTS = 256
MAX_ITERATIONS = 50_000


class FoliationInvalid(ValueError):
    pass


class MSPViolated(ValueError):
    pass


class DistortionNotFiberConstant(ValueError):
    pass


class NotConverged(RuntimeWarning):
    pass


# ---------------------------------------------------------------- closed forms


def radial_image_modulus(k: float, r0: float, psi0: float) -> float:
    """Modulus of the radial stretch image of the extremal radial family."""
    s2, c2 = math.sin(2 * psi0), math.cos(2 * psi0)
    inner = k * s2 / (1 + k**2 + (k**2 - 1) * c2) + math.atan(math.tan(psi0) / k)
    return (2.0 / math.log(r0)) ** 3 / k**3 * inner


def open_question_function(k, psi0: float):
    """``k^{3/2} sin(2 psi0)/(1 + k^2 + (k^2 - 1) cos(2 psi0)) + k^{1/2} atan(tan(psi0)/k)``.

    Equals ``k^{7/2} Mod(f_k Gamma) / Mod(Gamma) * (psi0 + sin psi0 cos psi0)``.
    """
    k = np.asarray(k, dtype=float)
    s2, c2 = np.sin(2 * psi0), np.cos(2 * psi0)
    return k**1.5 * s2 / (1 + k**2 + (k**2 - 1) * c2) + np.sqrt(k) * np.arctan(np.tan(psi0) / k)


# ---------------------------------------------------------------- extremal density


def extremal_density_modulus(fol: Foliation, check: bool = True, rtol: float = 1e-12):
    """Extremal density ``1/((d - c) |gamma'|_H)`` and the modulus ``(d-c)^{-3} nu(Delta)``."""
    if check:
        residual = foliation_volume_residual(fol)
        if residual > FOLIATION_TOL:
            raise FoliationInvalid(f"measure decomposition residual {residual:.3e}")
    length = fol.length

    def evaluator(p):
        return 1.0 / (length * fol.speed(*fol.locate(p)))

    rho = Density(evaluator, lambda p: fol.contains(p, closed=True, tol=1e-12), "extremal")
    mass = integrate_box(lambda d1, d2: fol.nu_density(d1, d2), fol.delta_bounds, rtol=rtol)
    return rho, mass / length**3


@dataclass(frozen=True)
class AdmissibilityReport:
    min_integral: float
    passed: bool
    integrals: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"min_integral": self.min_integral, "passed": self.passed,
                "n_curves": int(len(self.integrals))}


def check_admissibility(rho: Density, curves: Sequence[HorizontalCurve],
                        tol: float = ADMISSIBILITY_TOL) -> AdmissibilityReport:
    values = np.array([line_integral(rho, c) for c in curves])
    low = float(values.min()) if len(values) else math.inf
    return AdmissibilityReport(low, bool(low >= 1.0 - tol), values)


# ---------------------------------------------------------------- discrete problem


@dataclass(frozen=True)
class ModulusProblem:
    """Curve-by-cell length matrix ``A`` and per-cell Haar measures ``weights``."""

    A: sparse.csr_matrix
    weights: np.ndarray
    grid: tuple[int, int, int]
    volume: float

    @property
    def n_curves(self) -> int:
        return self.A.shape[0]

    def objective(self, rho: np.ndarray) -> float:
        return float(np.dot(self.weights, rho**4))

    def subproblem(self, rows) -> "ModulusProblem":
        return ModulusProblem(self.A[rows], self.weights, self.grid, self.volume)


def grid_shape(n: int, n_curves: int) -> tuple[int, int, int]:
    """``n`` cells along the fibers; the transverse side is capped by
    ``sqrt(n_curves)`` so that every transverse column can carry a curve."""
    m = max(1, min(n, int(math.isqrt(max(n_curves, 1)))))
    return (n, m, m)


def _cell_weights(fol: Foliation, shape: tuple[int, int, int], order: int = 4) -> np.ndarray:
    grids, weights = box_rule(fol.bounds, shape, order)
    dens = fol.speed(*grids) ** 4 * fol.nu_density(grids[1], grids[2]) * weights
    n0, n1, n2 = shape
    return dens.reshape(n0, order, n1, order, n2, order).sum(axis=(1, 3, 5))


def build_problem(fol: Foliation, curves: Sequence[HorizontalCurve],
                  grid: int | tuple[int, int, int] = 32, segments: int = MIN_SEGMENTS) -> ModulusProblem:
    """Discretise ``curves`` on a tensor grid in foliation coordinates.

    Each curve is cut into at least ``segments`` pieces (a multiple of the
    number of cells along the fibers); a piece contributes its midpoint
    horizontal speed times its parameter length to the cell containing its
    midpoint.  Cell measures are Gauss-Legendre integrals of
    ``|gamma'|_H^4 d s d nu``.
    """
    shape = grid_shape(grid, len(curves)) if isinstance(grid, int) else tuple(grid)
    n_seg = shape[0] * math.ceil(segments / shape[0])
    weights = _cell_weights(fol, shape).ravel()
    bounds = fol.bounds
    rows, cols, vals = [], [], []
    for j, curve in enumerate(curves):
        edges = np.linspace(curve.c, curve.d, n_seg + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        lengths = curve.speed(mid) * np.diff(edges)
        coords = fol.locate(curve.point(mid))
        idx = []
        inside = np.ones(n_seg, dtype=bool)
        for x, (lo, hi), n in zip(coords, bounds, shape):
            u = (np.asarray(x) - lo) / (hi - lo)
            inside &= (u > -1e-9) & (u < 1 + 1e-9)
            idx.append(np.clip(np.floor(u * n).astype(int), 0, n - 1))
        flat = np.ravel_multi_index(idx, shape)[inside]
        rows.append(np.full(flat.size, j))
        cols.append(flat)
        vals.append(lengths[inside])
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(len(curves), weights.size))
    A.sum_duplicates()
    return ModulusProblem(A, weights, shape, float(fol.volume) if fol.volume is not None else float(weights.sum()))


@dataclass(frozen=True)
class ModulusResult:
    value: float
    density: np.ndarray = field(repr=False)
    worst_slack: float
    max_violation: float
    iterations: int
    converged: bool
    grid: tuple[int, int, int]
    n_curves: int

    def to_dict(self) -> dict:
        return {"value": self.value, "converged": self.converged, "iterations": self.iterations,
                "max_violation": self.max_violation, "worst_slack": self.worst_slack,
                "grid": list(self.grid), "n_curves": self.n_curves}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def discrete_modulus(problem: ModulusProblem, *, max_iter: int = MAX_ITERATIONS,
                     rtol: float = 1e-6, window: int = 200, patience: int = 5,
                     projections: int = 3, violation_tol: float = 1e-9) -> ModulusResult:
    """Projected subgradient with an adaptive Polyak level.

    Each iteration takes a Polyak step on the objective towards the level
    ``best - delta``, then a few simultaneous projections onto the violated
    halfspaces ``a_j . rho >= 1``, then clips at zero.  Every iterate is
    rescaled by ``min_j a_j . rho`` to certify feasibility, and the best
    certified objective is kept.  ``delta`` halves after ``patience``
    iterations without sufficient progress.
    """
    A, w = problem.A, problem.weights
    if np.any(np.diff(A.indptr) == 0):
        raise ValueError("some curve meets no cell; the problem is infeasible")
    AT = A.T.tocsr()
    used = np.asarray(A.sum(axis=0)).ravel() > 0
    cover = np.maximum(np.diff(AT.indptr), 1).astype(float)
    row_sq = np.asarray(A.multiply(A).sum(axis=1)).ravel()

    def certify(r):
        m = float((A @ r).min())
        return (r / m, w @ (r / m) ** 4) if m > 0 else (r, math.inf)

    rho = np.where(used, 1.0, 0.0)
    best_rho, best = certify(rho)
    rho = best_rho.copy()
    delta = 0.5 * best
    stall = 0
    history = [best]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f = float(w @ rho**4)
        g = 4.0 * w * rho**3
        target = min(best - delta, f * (1 - 1e-12))
        gg = float(g @ g)
        if gg > 0:
            rho = np.maximum(rho - max(f - target, 0.0) / gg * g, 0.0)
        for _ in range(projections):
            v = np.maximum(1.0 - A @ rho, 0.0)
            if v.max() <= 1e-12:
                break
            rho = np.maximum(rho + (AT @ (v / row_sq)) / cover, 0.0)
        cand, val = certify(rho)
        if val < best - 0.5 * delta:
            best, best_rho, stall = val, cand, 0
        else:
            if val < best:
                best, best_rho = val, cand
            stall += 1
            if stall >= patience:
                delta *= 0.5
                stall = 0
        history.append(best)
        if (it >= window and history[-window - 1] - best < rtol * best and delta < rtol * best):
            converged = True
            break
    slack = A @ best_rho - 1.0
    max_violation = float(max(0.0, -slack.min()))
    converged = converged and max_violation <= violation_tol
    if not converged:
        warnings.warn(f"discrete modulus solver stopped after {it} iterations without converging",
                      NotConverged, stacklevel=2)
    return ModulusResult(float(best), best_rho, float(slack.min()), max_violation, it,
                         converged, tuple(problem.grid), problem.n_curves)


# ---------------------------------------------------------------- distortion functionals


def mean_distortion(f: MapUnderTest, rho: Density, fol: Foliation, *, rtol: float = 1e-11,
                    method: str = "auto") -> float:
    """``int K(p, f)^2 rho(p)^4 d mu`` over the foliated domain.

    The integral is taken in foliation coordinates, where the Haar measure is
    ``|gamma'|_H^4 ds d nu``.
    """

    def integrand(s, d1, d2):
        p = fol.curve_map(s, d1, d2)
        K = distortion(f, p, method)
        return K**2 * rho(p) ** 4 * fol.speed(s, d1, d2) ** 4 * fol.nu_density(d1, d2)

    return integrate_box(integrand, fol.bounds, rtol=rtol)


def _fiber_sample(fol: Foliation, n_delta: int, n_s: int):
    (l1, h1), (l2, h2) = fol.delta_bounds
    s = np.linspace(fol.c, fol.d, n_s + 2)[1:-1]
    d1 = np.linspace(l1, h1, n_delta + 2)[1:-1]
    d2 = np.linspace(l2, h2, n_delta + 2)[1:-1]
    return np.meshgrid(s, d1, d2, indexing="ij")


def check_msp(f: MapUnderTest, fol: Foliation, n_delta: int = 5, n_s: int = 9,
              method: str = "auto") -> np.ndarray:
    """Raise MSPViolated unless the indicator is real and negative on sampled fibers."""
    S, D1, D2 = _fiber_sample(fol, n_delta, n_s)
    out = []
    for i in range(D1.shape[1]):
        for j in range(D1.shape[2]):
            curve = fol.fiber(float(D1[0, i, j]), float(D2[0, i, j]))
            ind = msp_indicator(f, curve, S[:, i, j], method)
            nonzero = np.abs(ind) > 1e-12
            if np.any(np.abs(ind.imag) > MSP_IMAG_TOL) or np.any(ind.real[nonzero] >= 0):
                raise MSPViolated(f"minimal stretching fails on {curve.label}")
            out.append(ind)
    return np.concatenate(out)


def check_fiber_constant_distortion(f: MapUnderTest, fol: Foliation, n_delta: int = 5,
                                    n_s: int = 9, method: str = "auto") -> float:
    S, D1, D2 = _fiber_sample(fol, n_delta, n_s)
    K = distortion(f, fol.curve_map(S, D1, D2), method)
    spread = float(np.max(K.max(axis=0) - K.min(axis=0)))
    if spread > FIBER_CONSTANT_TOL * float(K.max()):
        raise DistortionNotFiberConstant(f"distortion varies by {spread:.3e} along a fiber")
    return spread


def image_family_modulus(f: MapUnderTest, fol: Foliation, *, rtol: float = 1e-12,
                         method: str = "auto") -> float:
    """``(d - c)^{-3} int_Delta K_f(delta)^2 d nu(delta)`` for maps with the
    minimal stretching property on the foliation and fiber-constant distortion."""
    check_msp(f, fol, method=method)
    check_fiber_constant_distortion(f, fol, method=method)
    s_mid = 0.5 * (fol.c + fol.d)

    def integrand(d1, d2):
        p = fol.curve_map(np.full(np.shape(d1), s_mid), d1, d2)
        return distortion(f, p, method) ** 2 * fol.nu_density(d1, d2)

    return integrate_box(integrand, fol.delta_bounds, rtol=rtol) / fol.length**3


def max_distortion(f: MapUnderTest, fol: Foliation, n: int = 33, method: str = "auto") -> float:
    """Largest distortion quotient on a closed grid in foliation coordinates."""
    axes = [np.linspace(lo, hi, n) for lo, hi in fol.bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    return float(np.max(distortion(f, fol.curve_map(*grids), method)))


@dataclass(frozen=True)
class QuasiInvarianceReport:
    lower: float
    upper: float
    value: float
    lower_slack: float
    upper_slack: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(lower=self.lower, upper=self.upper, value=self.value,
                    lower_slack=self.lower_slack, upper_slack=self.upper_slack, passed=self.passed)


def quasi_invariance_check(K_f: float, mod: float, mod_f: float, slack: float = 1e-9) -> QuasiInvarianceReport:
    """``K_f^{-2} Mod <= Mod(f Gamma) <= K_f^2 Mod`` with relative slack."""
    lower, upper = mod / K_f**2, mod * K_f**2
    lo_s, up_s = mod_f - lower, upper - mod_f
    tol = slack * max(1.0, abs(mod_f))
    return QuasiInvarianceReport(lower, upper, mod_f, lo_s, up_s, bool(lo_s >= -tol and up_s >= -tol))


def change_of_variables(f: MapUnderTest, u, fol: Foliation, support_box, *,
                        rtol: float = 1e-9, method: str = "auto") -> tuple[float, float]:
    """Both sides of ``int_Omega (u o f) J d mu = int_{f(Omega)} u d mu``.

    The left side is integrated in foliation coordinates.  ``u`` must be
    negligible outside ``support_box`` (a cartesian box inside the image
    domain), over which the right side is integrated.
    """

    def left(s, d1, d2):
        p = fol.curve_map(s, d1, d2)
        return u(f(p)) * jacobian_mu(f, p, method) * fol.speed(s, d1, d2) ** 4 * fol.nu_density(d1, d2)

    def right(a, lam, t):
        return u(Point(a, lam, t)) / lam**2

    return integrate_box(left, fol.bounds, rtol=rtol), integrate_box(right, support_box, rtol=rtol)
