"""Smooth maps of the group and their horizontal differential quantities.

A map is described by its forward evaluator and, optionally, an analytic
Jacobian in cartesian coordinates.  From either the analytic Jacobian or a
fourth-order central difference along the frame vectors we get the frame
derivatives ``Uf, Vf, Wf`` and then

* ``Zf_I = (V f_I - i U f_I)/2`` and ``Zbar f_I = (V f_I + i U f_I)/2``,
* the Beltrami coefficient ``mu = Zbar f_I / Zf_I``,
* the distortion quotient ``K = (1 + |mu|)/(1 - |mu|)``,
* the volume derivative ``J = (|Zf_I|^2 - |Zbar f_I|^2)^2 / (2 f_2)^4``,
* the contact factor ``sigma = (|Zf_I|^2 - |Zbar f_I|^2)/(4 f_2^2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import LogCylPoint, Point, Tangent, frame_at, horizontal_norm
from .curves import HorizontalCurve

FD_STEP = 1e-5
DEGENERATE_TOL = 1e-12
QC_TOL = 1e-12
ZERO_VELOCITY_TOL = 1e-14


class DegenerateDerivative(ArithmeticError):
    pass


class NotQuasiconformalAtPoint(ArithmeticError):
    pass


class ZeroVelocity(ArithmeticError):
    pass


LogCylForm = Callable[[LogCylPoint], tuple]


@dataclass(frozen=True)
class MapUnderTest:
    """A smooth map ``p -> (f_1, f_2 + i f_3)``.

    ``jacobian(p)`` returns the ``(..., 3, 3)`` matrix of partial derivatives
    of ``(f_1, f_2, f_3)`` with respect to ``(a, lam, t)``.  ``logcyl``
    evaluates the same map in log-cylindrical coordinates, returning
    ``(A, Xi, Psi)``.  ``inverse`` is a zero-argument factory for the inverse
    map, so that pairs of maps can refer to each other.
    """

    forward: Callable[[Point], Point]
    jacobian: Optional[Callable[[Point], np.ndarray]] = None
    logcyl: Optional[LogCylForm] = None
    inverse: Optional[Callable[[], "MapUnderTest"]] = None
    name: str = "map"

    def __call__(self, p: Point) -> Point:
        return self.forward(p)

    def without_jacobian(self) -> "MapUnderTest":
        return MapUnderTest(self.forward, None, self.logcyl, self.inverse, self.name + " (fd)")


@dataclass(frozen=True)
class FrameDerivatives:
    """Derivatives of ``(f_1, f_2, f_3)`` along ``U, V, W``; each has shape ``(..., 3)``."""

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    image: Point
    method: str


@dataclass(frozen=True)
class DerivativeRecord:
    Zf_I: complex
    Zbar_f_I: complex
    at: Point
    method: str


def _tangent_array(v: Tangent) -> np.ndarray:
    return np.stack(np.broadcast_arrays(v.da, v.dlam, v.dt), axis=-1)


def _directional_fd(f: MapUnderTest, p: Point, direction: np.ndarray) -> np.ndarray:
    base = p.as_array()
    h = FD_STEP * (1.0 + np.linalg.norm(base, axis=-1))[..., None]

    def at(m):
        return f(Point.from_array(base + m * h * direction)).as_array()

    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h)


def frame_derivatives(f: MapUnderTest, p: Point, method: str = "auto") -> FrameDerivatives:
    """``U f``, ``V f`` and ``W f`` at ``p`` by the analytic Jacobian or finite differences."""
    if method == "auto":
        method = "analytic" if f.jacobian is not None else "finite-difference"
    frame = frame_at(p)
    dirs = [_tangent_array(frame.U), _tangent_array(frame.V), _tangent_array(frame.W)]
    if method == "analytic":
        if f.jacobian is None:
            raise ValueError(f"{f.name} has no analytic Jacobian")
        jac = f.jacobian(p)
        out = [np.einsum("...ij,...j->...i", jac, d) for d in dirs]
    elif method == "finite-difference":
        out = [_directional_fd(f, p, d) for d in dirs]
    else:
        raise ValueError(f"unknown derivative method {method!r}")
    return FrameDerivatives(*out, image=f(p), method=method)


def _z_pair(Ug, Vg):
    return 0.5 * (Vg - 1j * Ug), 0.5 * (Vg + 1j * Ug)


def _complex_pair(fd: FrameDerivatives):
    U_I = fd.U[..., 1] + 1j * fd.U[..., 2]
    V_I = fd.V[..., 1] + 1j * fd.V[..., 2]
    return _z_pair(U_I, V_I)


def horizontal_derivatives(f: MapUnderTest, p: Point, method: str = "auto",
                           orientation_preserving: bool = False) -> DerivativeRecord:
    fd = frame_derivatives(f, p, method)
    Z, Zb = _complex_pair(fd)
    if orientation_preserving and np.any(np.abs(Z) <= np.abs(Zb)):
        raise DegenerateDerivative(f"{f.name} is not orientation preserving at the given point")
    return DerivativeRecord(Z, Zb, p, fd.method)


def beltrami(f: MapUnderTest, p: Point, method: str = "auto"):
    rec = horizontal_derivatives(f, p, method)
    # Zf_I scales with the image height (it is 2 lam for the identity)
    scale = 2.0 * np.abs(f(p).lam)
    if np.any(np.abs(rec.Zf_I) < DEGENERATE_TOL * scale):
        raise DegenerateDerivative("Zf_I vanishes")
    return rec.Zbar_f_I / rec.Zf_I


def _distortion_from_mu(mu):
    m = np.abs(mu)
    if np.any(m >= 1.0 - QC_TOL):
        raise NotQuasiconformalAtPoint(f"|mu| = {np.max(m):.15g} is not below 1")
    return (1.0 + m) / (1.0 - m)


def distortion(f: MapUnderTest, p: Point, method: str = "auto"):
    return _distortion_from_mu(beltrami(f, p, method))


def distortion_sq(f: MapUnderTest, p: Point, method: str = "auto"):
    return distortion(f, p, method) ** 2


def _modulus_gap(rec: DerivativeRecord):
    return np.abs(rec.Zf_I) ** 2 - np.abs(rec.Zbar_f_I) ** 2


def jacobian_mu(f: MapUnderTest, p: Point, method: str = "auto"):
    """Volume derivative of ``f`` with respect to the Haar measure."""
    rec = horizontal_derivatives(f, p, method)
    f2 = f(p).lam
    return _modulus_gap(rec) ** 2 / (2.0 * f2) ** 4


def dh_norm(f: MapUnderTest, p: Point, method: str = "auto"):
    """Operator norm of the horizontal differential."""
    rec = horizontal_derivatives(f, p, method)
    return (np.abs(rec.Zf_I) + np.abs(rec.Zbar_f_I)) / (2.0 * f(p).lam)


def analytic_qc_ratio(f: MapUnderTest, p: Point, method: str = "auto"):
    """``||D_H f||^4 / J``; equals ``K^2`` for contact maps."""
    return dh_norm(f, p, method) ** 4 / jacobian_mu(f, p, method)


@dataclass(frozen=True)
class ContactResidual:
    r1: complex
    r2: complex
    r3: float
    sigma: float

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.r1)), np.max(np.abs(self.r2)), np.max(np.abs(self.r3))))


def contact_residual(f: MapUnderTest, p: Point, method: str = "auto") -> ContactResidual:
    """Residuals of the contact system; ``sigma`` comes from the derivative identity."""
    fd = frame_derivatives(f, p, method)
    Z_I, Zb_I = _complex_pair(fd)
    Z1, Zb1 = _z_pair(fd.U[..., 0], fd.V[..., 0])
    Z3, Zb3 = _z_pair(fd.U[..., 2], fd.V[..., 2])
    f2 = fd.image.lam
    sigma = (np.abs(Z_I) ** 2 - np.abs(Zb_I) ** 2) / (4.0 * f2**2)
    r1 = Z3 - 2.0 * f2 * Z1
    r2 = Zb3 - 2.0 * f2 * Zb1
    r3 = fd.W[..., 2] - 2.0 * f2 * (sigma + fd.W[..., 0])
    return ContactResidual(r1, r2, r3, sigma)


def _velocity_I(curve: HorizontalCurve, s):
    v = curve.velocity_I(s)
    if np.any(np.abs(v) < ZERO_VELOCITY_TOL):
        raise ZeroVelocity("curve velocity vanishes")
    return v


def msp_indicator(f: MapUnderTest, curve: HorizontalCurve, s, method: str = "auto"):
    """``mu_f(gamma(s)) * conj(gamma_I'(s)) / gamma_I'(s)``.

    The curve family has the minimal stretching property for ``f`` when this
    is real and negative wherever ``mu_f`` does not vanish.
    """
    v = _velocity_I(curve, s)
    return beltrami(f, curve.point(s), method) * np.conj(v) / v


def pushforward_speed(f: MapUnderTest, curve: HorizontalCurve, s, method: str = "auto"):
    """Horizontal speed of ``f o gamma`` from the chain rule along horizontal curves."""
    v = _velocity_I(curve, s)
    p = curve.point(s)
    rec = horizontal_derivatives(f, p, method)
    d_image = (rec.Zf_I * v + rec.Zbar_f_I * np.conj(v)) / (2.0 * p.lam)
    return np.abs(d_image) / (2.0 * f(p).lam)


def pushforward_bounds(f: MapUnderTest, curve: HorizontalCurve, s, method: str = "auto"):
    """Lower and upper bounds ``(|Z| -/+ |Zbar|)/(2 f_2) * |gamma'|_H``."""
    p = curve.point(s)
    rec = horizontal_derivatives(f, p, method)
    scale = curve.speed(s) / (2.0 * f(p).lam)
    z, zb = np.abs(rec.Zf_I), np.abs(rec.Zbar_f_I)
    return (z - zb) * scale, (z + zb) * scale


def pushforward_speed_fd(f: MapUnderTest, curve: HorizontalCurve, s, rel_step: float = 1e-5):
    """Speed of ``f o gamma`` by differentiating the composed curve numerically."""
    s = np.asarray(s, dtype=float)
    h = rel_step * (curve.d - curve.c)

    def img(x):
        return f(curve.point(x)).as_array()

    d = (-img(s + 2 * h) + 8 * img(s + h) - 8 * img(s - h) + img(s - 2 * h)) / (12 * h)
    q = f(curve.point(s))
    return horizontal_norm(q, Tangent(d[..., 0], d[..., 1], d[..., 2]), tol=1e-6)


def _logcyl_partials(f: MapUnderTest, q: LogCylPoint) -> np.ndarray:
    """Partials of ``(A, Xi, Psi)`` with respect to ``(a, xi, psi)``, shape ``(..., 3, 3)``."""
    if f.logcyl is None:
        raise ValueError(f"{f.name} has no log-cylindrical form")
    base = q.as_array()
    h = FD_STEP * (1.0 + np.linalg.norm(base, axis=-1))[..., None]
    cols = []
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1.0

        def at(m):
            x = base + m * h * e
            return np.stack(np.broadcast_arrays(*f.logcyl(LogCylPoint(x[..., 0], x[..., 1], x[..., 2]))), axis=-1)

        cols.append((-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h))
    return np.stack(cols, axis=-1)


def _logcyl_z(q: LogCylPoint, d_a, d_xi, d_psi):
    rot = np.exp(-1j * q.psi) * np.cos(q.psi)
    Z = rot * (d_xi - 1j * d_psi) - 0.5j * d_a
    Zb = np.conj(rot) * (d_xi + 1j * d_psi) + 0.5j * d_a
    return Z, Zb


def beltrami_logcyl(f: MapUnderTest, q: LogCylPoint):
    """Beltrami coefficient computed entirely in log-cylindrical coordinates.

    With ``w = Xi + i Psi`` the image satisfies ``f_I = exp(w)``, hence
    ``mu = Zbar w / Z w`` where ``Z = exp(-i psi) cos(psi) (d_xi - i d_psi) - (i/2) d_a``.
    """
    D = _logcyl_partials(f, q)
    w = D[..., 1, :] + 1j * D[..., 2, :]
    Z, Zb = _logcyl_z(q, w[..., 0], w[..., 1], w[..., 2])
    if np.any(np.abs(Z) < DEGENERATE_TOL):
        raise DegenerateDerivative("Z w vanishes")
    return Zb / Z


def contact_residual_logcyl(f: MapUnderTest, q: LogCylPoint):
    """Residuals of the contact equations in log-cylindrical coordinates.

    Returns ``(e_psi, e_xi, e_a, sigma)`` where the contact factor is
    ``sigma = (|Z w|^2 - |Zbar w|^2)/(4 cos^2 Psi)`` and

    * ``e_psi = Psi_psi + tan(Psi) Xi_psi - 2 A_psi - sigma``
    * ``e_xi = Psi_xi + tan(Psi) Xi_xi - 2 A_xi - sigma tan(psi)``
    * ``e_a = 2 A_a - Psi_a - tan(Psi) Xi_a - 2 sigma``
    """
    D = _logcyl_partials(f, q)
    A, Xi, Psi = (np.asarray(x, dtype=float) for x in f.logcyl(q))
    w = D[..., 1, :] + 1j * D[..., 2, :]
    Z, Zb = _logcyl_z(q, w[..., 0], w[..., 1], w[..., 2])
    sigma = (np.abs(Z) ** 2 - np.abs(Zb) ** 2) / (4.0 * np.cos(Psi) ** 2)
    tP = np.tan(Psi)
    e_psi = D[..., 2, 2] + tP * D[..., 1, 2] - 2 * D[..., 0, 2] - sigma
    e_xi = D[..., 2, 1] + tP * D[..., 1, 1] - 2 * D[..., 0, 1] - sigma * np.tan(q.psi)
    e_a = 2 * D[..., 0, 0] - D[..., 2, 0] - tP * D[..., 1, 0] - 2 * sigma
    return e_psi, e_xi, e_a, sigma


def diagnostics(f: MapUnderTest, p: Point, method: str = "auto") -> list[dict]:
    """Per-point records with the Beltrami coefficient, distortion, volume
    derivative and contact residuals."""
    rec = horizontal_derivatives(f, p, method)
    mu = rec.Zbar_f_I / rec.Zf_I
    K = (1 + np.abs(mu)) / (1 - np.abs(mu))
    J = jacobian_mu(f, p, method)
    res = contact_residual(f, p, method)
    arrays = np.broadcast_arrays(p.a, p.lam, p.t, mu.real, mu.imag, K, J,
                                 np.abs(res.r1), np.abs(res.r2), np.abs(res.r3), res.sigma)
    rows = []
    for a, lam, t, mr, mi, k, j, r1, r2, r3, sg in zip(*(np.atleast_1d(x) for x in arrays)):
        rows.append({
            "p": [float(a), float(lam), float(t)],
            "mu": [float(mr), float(mi)],
            "K": float(k),
            "J": float(j),
            "contact_residuals": [float(r1), float(r2), float(r3)],
            "sigma": float(sg),
        })
    return rows


def diagnostics_json(f: MapUnderTest, p: Point, method: str = "auto") -> str:
    return json.dumps({"map": f.name, "points": diagnostics(f, p, method)}, sort_keys=True)
