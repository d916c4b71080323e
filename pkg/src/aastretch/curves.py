"""Horizontal curves, densities, line integrals and foliations."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    LogCylPoint,
    Point,
    Tangent,
    from_logcyl,
    haar_density,
    logcyl_differential,
)
from .quadrature import RTOL, integrate

CURVE_TOL = 1e-8
FD_REL_STEP = 1e-5

Coords = tuple[np.ndarray, np.ndarray, np.ndarray]


class NonHorizontalCurve(ValueError):
    pass


def _five_point(fun, s, h):
    plus2, plus1 = fun(s + 2 * h), fun(s + h)
    minus1, minus2 = fun(s - h), fun(s - 2 * h)
    return tuple(
        (-p2 + 8 * p1 - 8 * m1 + m2) / (12 * h)
        for p2, p1, m1, m2 in zip(plus2, plus1, minus1, minus2)
    )


@dataclass(frozen=True)
class HorizontalCurve:
    """A parametrised curve on ``[c, d]``.

    ``position(s)`` returns the coordinate triple in the curve's chart:
    ``(a, lam, t)`` for ``chart="cartesian"`` and ``(a, xi, psi)`` for
    ``chart="logcyl"``.  ``velocity`` returns the derivative of that triple;
    without it a five-point central difference is used.
    """

    c: float
    d: float
    position: Callable[[np.ndarray], Coords]
    velocity: Optional[Callable[[np.ndarray], Coords]] = None
    chart: str = "cartesian"
    label: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.c) and np.isfinite(self.d) and self.c < self.d):
            raise ValueError("curve domain must be a finite interval with c < d")
        if self.chart not in ("cartesian", "logcyl"):
            raise ValueError(f"unknown chart {self.chart!r}")

    def coords(self, s) -> Coords:
        return tuple(np.asarray(x, dtype=float) for x in self.position(np.asarray(s, dtype=float)))

    def coord_velocity(self, s) -> Coords:
        s = np.asarray(s, dtype=float)
        if self.velocity is not None:
            return tuple(np.asarray(x, dtype=float) for x in self.velocity(s))
        return _five_point(self.coords, s, FD_REL_STEP * (self.d - self.c))

    def point(self, s) -> Point:
        x = self.coords(s)
        if self.chart == "cartesian":
            return Point(*x)
        return from_logcyl(LogCylPoint(*x))

    def tangent(self, s) -> Tangent:
        """Velocity in cartesian components."""
        v = self.coord_velocity(s)
        if self.chart == "cartesian":
            return Tangent(*v)
        D = logcyl_differential(LogCylPoint(*self.coords(s)))
        vec = np.stack(np.broadcast_arrays(*v), axis=-1)
        out = np.einsum("...ij,...j->...i", D, vec)
        return Tangent(out[..., 0], out[..., 1], out[..., 2])

    def velocity_I(self, s) -> np.ndarray:
        """Complex velocity of the projection ``lam + i t``."""
        v = self.tangent(s)
        return v.dlam + 1j * v.dt

    def residual(self, s) -> np.ndarray:
        x, v = self.coords(s), self.coord_velocity(s)
        if self.chart == "cartesian":
            return v[2] / (2.0 * x[1]) - v[0]
        return 0.5 * v[2] + 0.5 * np.tan(x[2]) * v[1] - v[0]

    def speed(self, s) -> np.ndarray:
        x, v = self.coords(s), self.coord_velocity(s)
        if self.chart == "cartesian":
            return np.hypot(v[1], v[2]) / (2.0 * x[1])
        return np.hypot(v[1], v[2]) / (2.0 * np.cos(x[2]))

    def reversed(self) -> "HorizontalCurve":
        c, d = self.c, self.d
        pos = self.position

        def velocity(s):
            return tuple(-x for x in self.coord_velocity(c + d - s))

        return HorizontalCurve(c, d, lambda s: pos(c + d - s), velocity, self.chart, self.label)

    def sample(self, n: int = 257) -> tuple[np.ndarray, Point]:
        s = np.linspace(self.c, self.d, n)
        return s, self.point(s)


def horizontality_residual(curve: HorizontalCurve, s) -> np.ndarray:
    return curve.residual(s)


def assert_horizontal(curve: HorizontalCurve, n: int = 65, tol: float = CURVE_TOL) -> None:
    s = np.linspace(curve.c, curve.d, n)
    res = np.abs(curve.residual(s))
    scale = 1.0 + np.sqrt(sum(v**2 for v in curve.coord_velocity(s)))
    if np.any(res > tol * scale):
        raise NonHorizontalCurve(
            f"curve {curve.label or ''} has horizontality residual {res.max():.3e}"
        )


def horizontal_length(curve: HorizontalCurve, rtol: float = RTOL) -> float:
    assert_horizontal(curve)
    return integrate(curve.speed, curve.c, curve.d, rtol=rtol)


@dataclass(frozen=True)
class Density:
    """Nonnegative Borel density, zero outside its declared support."""

    evaluator: Callable[[Point], np.ndarray]
    support: Optional[Callable[[Point], np.ndarray]] = None
    label: str = ""

    def __call__(self, p: Point) -> np.ndarray:
        value = np.asarray(self.evaluator(p), dtype=float)
        if self.support is not None:
            value = np.where(self.support(p), value, 0.0)
        if np.any(value < 0):
            raise ValueError(f"density {self.label} takes negative values")
        return value

    def scaled(self, factor: float) -> "Density":
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        return Density(lambda p: factor * self(p), None, f"{factor:g}*{self.label}")

    def __add__(self, other: "Density") -> "Density":
        return Density(lambda p: self(p) + other(p), None, f"{self.label}+{other.label}")


ZERO_DENSITY = Density(lambda p: np.zeros(np.shape(p.lam)), label="0")


def line_integral(rho: Density, curve: HorizontalCurve, rtol: float = RTOL) -> float:
    """``int_gamma rho dl`` by composite Gauss-Legendre quadrature."""
    assert_horizontal(curve)
    return integrate(lambda s: rho(curve.point(s)) * curve.speed(s), curve.c, curve.d, rtol=rtol)


@dataclass(frozen=True)
class Foliation:
    """A family of horizontal fibers ``gamma(s, d1, d2)`` filling a domain.

    ``nu_density`` is the density of the fiber measure on the parameter box,
    ``locate`` inverts ``curve_map`` (returns ``(s, d1, d2)``) and ``volume``
    optionally records the Haar volume of the foliated domain.
    """

    c: float
    d: float
    delta_bounds: tuple[tuple[float, float], tuple[float, float]]
    curve_map: Callable[..., Point]
    velocity: Callable[..., Tangent]
    nu_density: Callable[[np.ndarray, np.ndarray], np.ndarray]
    locate: Callable[[Point], Coords]
    volume: Optional[float] = None
    label: str = ""

    @property
    def length(self) -> float:
        return self.d - self.c

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return [(self.c, self.d), *self.delta_bounds]

    def speed(self, s, d1, d2) -> np.ndarray:
        p = self.curve_map(s, d1, d2)
        v = self.velocity(s, d1, d2)
        return np.hypot(v.dlam, v.dt) / (2.0 * p.lam)

    def fiber(self, d1: float, d2: float) -> HorizontalCurve:
        def position(s):
            p = self.curve_map(s, d1, d2)
            return np.broadcast_arrays(p.a, p.lam, p.t)

        def velocity(s):
            v = self.velocity(s, d1, d2)
            return np.broadcast_arrays(v.da, v.dlam, v.dt)

        return HorizontalCurve(self.c, self.d, position, velocity, "cartesian",
                               f"{self.label} fiber ({d1:.6g}, {d2:.6g})")

    def contains(self, p: Point, closed: bool = False, tol: float = 0.0) -> np.ndarray:
        coords = self.locate(p)
        inside = np.ones(np.shape(coords[0]), dtype=bool)
        for x, (lo, hi) in zip(coords, self.bounds):
            if closed:
                inside &= (x >= lo - tol) & (x <= hi + tol)
            else:
                inside &= (x > lo) & (x < hi)
        return inside


def foliation_volume_residual(fol: Foliation, samples: int = 200, seed: int = 0,
                              margin: float = 0.01) -> float:
    """Largest relative mismatch between ``d mu(gamma)`` and ``|gamma'|_H^4 ds dnu``.

    The Jacobian of ``(s, d1, d2) -> gamma`` is taken by central differences.
    """
    rng = np.random.default_rng(seed)
    params = []
    for lo, hi in fol.bounds:
        span = hi - lo
        params.append(lo + span * (margin + (1 - 2 * margin) * rng.random(samples)))
    steps = [1e-6 * (hi - lo) for lo, hi in fol.bounds]
    cols = []
    for axis, h in enumerate(steps):
        up = [x + (h if i == axis else 0.0) for i, x in enumerate(params)]
        dn = [x - (h if i == axis else 0.0) for i, x in enumerate(params)]
        cols.append((fol.curve_map(*up).as_array() - fol.curve_map(*dn).as_array()) / (2 * h))
    jac = np.stack(cols, axis=-1)
    det = np.abs(np.linalg.det(jac))
    p = fol.curve_map(*params)
    lhs = haar_density(p) * det
    rhs = fol.speed(*params) ** 4 * fol.nu_density(params[1], params[2])
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def write_curves_csv(curves: Sequence[HorizontalCurve], fh, n: int = 257) -> None:
    """Write sampled curves as CSV rows ``curve, s, a, lam, t``."""
    writer = csv.writer(fh)
    writer.writerow(["curve", "s", "a", "lam", "t"])
    for idx, curve in enumerate(curves):
        s, p = curve.sample(n)
        for row in zip(s, *np.broadcast_arrays(p.a, p.lam, p.t)):
            writer.writerow([idx, *(f"{x:.17g}" for x in row)])
