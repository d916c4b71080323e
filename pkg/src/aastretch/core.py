"""Group law, left-invariant frame, contact form and log-cylindrical chart.

Points of the group are triples ``(a, lam, t)`` with ``lam > 0``; the complex
coordinate ``lam + i t`` lives in the right half-plane.  Every function here
accepts scalars or equally shaped numpy arrays in the coordinate slots, so the
same code serves pointwise checks and vectorised quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

Real = Union[float, np.ndarray]

HORIZONTAL_TOL = 1e-9


class InvalidPoint(ValueError):
    """Coordinates outside the group (lam <= 0) or outside the chart (|psi| >= pi/2)."""


class NonHorizontalTangent(ValueError):
    pass


def _arr(x: ArrayLike) -> Real:
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


@dataclass(frozen=True)
class Point:
    """A point ``(a, lam + i t)`` in cartesian coordinates."""

    a: Real
    lam: Real
    t: Real

    def __post_init__(self):
        object.__setattr__(self, "a", _arr(self.a))
        object.__setattr__(self, "lam", _arr(self.lam))
        object.__setattr__(self, "t", _arr(self.t))
        if not np.all(self.lam > 0):
            raise InvalidPoint("lam must be positive")

    @property
    def z(self):
        return self.lam + 1j * self.t

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.a, self.lam, self.t), axis=-1)

    @classmethod
    def from_array(cls, arr: ArrayLike) -> "Point":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[..., 0], arr[..., 1], arr[..., 2])

    def __getitem__(self, idx) -> "Point":
        a, lam, t = np.broadcast_arrays(self.a, self.lam, self.t)
        return Point(a[idx], lam[idx], t[idx])


@dataclass(frozen=True)
class LogCylPoint:
    """Cylindrical-logarithmic coordinates ``(a, xi, psi)`` with ``|psi| < pi/2``."""

    a: Real
    xi: Real
    psi: Real

    def __post_init__(self):
        object.__setattr__(self, "a", _arr(self.a))
        object.__setattr__(self, "xi", _arr(self.xi))
        object.__setattr__(self, "psi", _arr(self.psi))
        if not np.all(np.abs(self.psi) < np.pi / 2):
            raise InvalidPoint("psi must lie in the open interval (-pi/2, pi/2)")

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.a, self.xi, self.psi), axis=-1)


@dataclass(frozen=True)
class Tangent:
    """Tangent vector components in the coordinate basis (d/da, d/dlam, d/dt)."""

    da: Real
    dlam: Real
    dt: Real

    def __post_init__(self):
        for name in ("da", "dlam", "dt"):
            value = _arr(getattr(self, name))
            if not np.all(np.isfinite(value)):
                raise ValueError(f"tangent component {name} is not finite")
            object.__setattr__(self, name, value)

    def euclidean_norm(self) -> Real:
        return np.sqrt(self.da**2 + self.dlam**2 + self.dt**2)


@dataclass(frozen=True)
class FrameValues:
    U: Tangent
    V: Tangent
    W: Tangent


IDENTITY = Point(0.0, 1.0, 0.0)


def group_mul(p: Point, q: Point) -> Point:
    """``p * q = (a_p + a_q, lam_p (lam_q + i t_q) + i t_p)``."""
    return Point(p.a + q.a, p.lam * q.lam, p.lam * q.t + p.t)


def group_inv(p: Point) -> Point:
    return Point(-p.a, 1.0 / p.lam, -p.t / p.lam)


def contact_form_eval(p: Point, v: Tangent) -> Real:
    """Evaluate ``dt/(2 lam) - da`` on ``v`` at ``p``."""
    return v.dt / (2.0 * p.lam) - v.da


def frame_at(p: Point) -> FrameValues:
    lam = p.lam
    zero = np.zeros_like(lam)
    one = np.ones_like(lam)
    return FrameValues(
        U=Tangent(one, zero, 2.0 * lam),
        V=Tangent(zero, 2.0 * lam, zero),
        W=Tangent(-one, zero, zero),
    )


def horizontal_norm(p: Point, v: Tangent, tol: float = HORIZONTAL_TOL) -> Real:
    """Sub-Riemannian length of a horizontal tangent vector.

    Raises NonHorizontalTangent when ``|theta(v)| > tol * (1 + |v|)``.
    """
    residual = np.abs(contact_form_eval(p, v))
    if np.any(residual > tol * (1.0 + v.euclidean_norm())):
        raise NonHorizontalTangent(
            f"contact form residual {np.max(residual):.3e} exceeds tolerance"
        )
    return np.hypot(v.dlam, v.dt) / (2.0 * p.lam)


def haar_density(p: Point) -> Real:
    """Density of the left Haar measure against da dlam dt."""
    return 1.0 / p.lam**2


def to_logcyl(p: Point) -> LogCylPoint:
    return LogCylPoint(p.a, np.log(np.hypot(p.lam, p.t)), np.arctan2(p.t, p.lam))


def from_logcyl(q: LogCylPoint) -> Point:
    r = np.exp(q.xi)
    return Point(q.a, r * np.cos(q.psi), r * np.sin(q.psi))


def logcyl_jacobian_det(q: LogCylPoint) -> Real:
    return np.exp(2.0 * q.xi)


def logcyl_differential(q: LogCylPoint) -> np.ndarray:
    """Jacobian matrix of the chart map, shape ``(..., 3, 3)``; rows (a, lam, t), cols (a, xi, psi)."""
    a, xi, psi = np.broadcast_arrays(q.a, q.xi, q.psi)
    r = np.exp(xi)
    c, s = r * np.cos(psi), r * np.sin(psi)
    out = np.zeros(a.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out
