"""Catalog of stretch maps, their domains, foliations and connecting curve families."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import LogCylPoint, Point, Tangent, from_logcyl, logcyl_differential, to_logcyl
from .curves import Density, Foliation, HorizontalCurve
from .maps import MapUnderTest

PSI0_MARGIN = 1e-3
BOUNDARY_TOL = 1e-9


class InvalidParameters(ValueError):
    pass


class PerturbationLeavesDomain(RuntimeError):
    pass


# ---------------------------------------------------------------- maps


def identity_map() -> MapUnderTest:
    def jac(p):
        return np.broadcast_to(np.eye(3), np.shape(p.lam) + (3, 3)).copy()

    return MapUnderTest(lambda p: p, jac, lambda q: (q.a, q.xi, q.psi), identity_map, "identity")


def linear_stretch(k: float) -> MapUnderTest:
    """``(a, lam + i t) -> (k a, lam + i k t)``."""
    if not k > 0:
        raise InvalidParameters("stretch factor must be positive")

    def forward(p):
        return Point(k * p.a, p.lam, k * p.t)

    def jac(p):
        out = np.zeros(np.shape(p.lam) + (3, 3))
        out[..., 0, 0] = k
        out[..., 1, 1] = 1.0
        out[..., 2, 2] = k
        return out

    def logcyl(q):
        p = forward(from_logcyl(q))
        r = to_logcyl(p)
        return r.a, r.xi, r.psi

    return MapUnderTest(forward, jac, logcyl, lambda: linear_stretch(1.0 / k), f"linear_stretch(k={k:g})")


def g_k_planar(k: float, xi, psi):
    """Planar radial stretch ``(xi, psi) -> (k xi, atan(tan(psi)/k))``."""
    psi = np.asarray(psi, dtype=float)
    if np.any(np.abs(psi) >= np.pi / 2):
        raise InvalidParameters("psi must lie in (-pi/2, pi/2)")
    return k * np.asarray(xi, dtype=float), np.arctan(np.tan(psi) / k)


def planar_stretch(k: float, z):
    """The planar map ``exp o g_k o log`` acting on the right half-plane."""
    z = np.asarray(z, dtype=complex)
    xi, psi = g_k_planar(k, np.log(np.abs(z)), np.angle(z))
    return np.exp(xi + 1j * psi)


def radial_stretch(k: float) -> MapUnderTest:
    """Contact lift of the planar radial stretch.

    In log-cylindrical coordinates
    ``(a, xi, psi) -> (a - psi/2 + atan(tan(psi)/k)/2, k xi, atan(tan(psi)/k))``;
    the forward evaluator uses the equivalent cartesian expression.
    """
    if not k > 0:
        raise InvalidParameters("stretch factor must be positive")

    def logcyl(q):
        xi2, psi2 = g_k_planar(k, q.xi, q.psi)
        return q.a - 0.5 * q.psi + 0.5 * psi2, xi2, psi2

    def forward(p):
        lam, t = p.lam, p.t
        r2 = lam**2 + t**2
        scale = np.sqrt(r2**k / (lam**2 * k**2 + t**2))
        a = p.a - 0.5 * np.arctan(t / lam) + 0.5 * np.arctan(t / (lam * k))
        return Point(a, scale * lam * k, scale * t)

    def jac(p):
        q = to_logcyl(p)
        psi = q.psi
        dpsi = k / (np.cos(psi) ** 2 * (k**2 + np.tan(psi) ** 2))
        inner = np.zeros(np.shape(psi) + (3, 3))
        inner[..., 0, 0] = 1.0
        inner[..., 0, 2] = -0.5 + 0.5 * dpsi
        inner[..., 1, 1] = k
        inner[..., 2, 2] = dpsi
        image = LogCylPoint(*logcyl(q))
        return logcyl_differential(image) @ inner @ np.linalg.inv(logcyl_differential(q))

    return MapUnderTest(forward, jac, logcyl, lambda: radial_stretch(1.0 / k), f"radial_stretch(k={k:g})")


def f_minus_one() -> MapUnderTest:
    """``(a, z) -> (a - atan(t/lam), 1/z)``, a conformal contact involution.

    In log-cylindrical coordinates it reads ``(a, xi, psi) -> (a - psi, -xi, -psi)``,
    the radial stretch formula with ``k = -1``.
    """

    def forward(p):
        r2 = p.lam**2 + p.t**2
        return Point(p.a - np.arctan(p.t / p.lam), p.lam / r2, -p.t / r2)

    def jac(p):
        lam, t = p.lam, p.t
        r2 = lam**2 + t**2
        w = -1.0 / (lam + 1j * t) ** 2
        out = np.zeros(np.shape(r2) + (3, 3))
        out[..., 0, 0] = 1.0
        out[..., 0, 1] = t / r2
        out[..., 0, 2] = -lam / r2
        out[..., 1, 1] = w.real
        out[..., 1, 2] = -w.imag
        out[..., 2, 1] = w.imag
        out[..., 2, 2] = w.real
        return out

    def logcyl(q):
        return q.a - q.psi, -q.xi, -q.psi

    return MapUnderTest(forward, jac, logcyl, f_minus_one, "f_minus_one")


# ---------------------------------------------------------------- scenarios

KIND_ALIASES = {
    "linear_lt1": "linear_k_lt_1",
    "linear_k_lt_1": "linear_k_lt_1",
    "linear_gt1": "linear_k_gt_1",
    "linear_k_gt_1": "linear_k_gt_1",
    "radial": "radial",
}


def canonical_kind(kind: str) -> str:
    try:
        return KIND_ALIASES[kind]
    except KeyError:
        raise InvalidParameters(f"unknown scenario kind {kind!r}") from None


@dataclass(frozen=True)
class PathModel:
    """Description of the fibers as planar paths plus the horizontality o.d.e.

    ``base(d1, d2)`` returns ``(a0, x, dx, y, dy)`` where ``x, y`` are callables
    of ``s`` giving the planar path (``(lam, t)`` in the cartesian chart,
    ``(xi, psi)`` in the log-cylindrical chart).  ``spans`` gives the size of
    the planar coordinate ranges used to scale perturbations.
    """

    chart: str
    base: Callable
    spans: tuple[float, float]

    def a_rate(self, x, dx, y, dy):
        if self.chart == "cartesian":
            return dy / (2.0 * x)
        return 0.5 * dy + 0.5 * np.tan(y) * dx


@dataclass(frozen=True)
class Scenario:
    kind: str
    k: float
    foliation: Foliation
    rho0: Density
    stretch: MapUnderTest
    mod_gamma0: float
    paths: PathModel
    image_level: Callable[[Point], np.ndarray]
    image_level_values: tuple[float, float]
    r0: Optional[float] = None
    psi0: Optional[float] = None
    extras: dict = field(default_factory=dict)

    @property
    def volume(self) -> float:
        return self.foliation.volume

    def contains(self, p: Point, closed: bool = False, tol: float = 0.0):
        return self.foliation.contains(p, closed=closed, tol=tol)

    def image_contains(self, p: Point, closed: bool = False, tol: float = 0.0):
        return self.contains(self.stretch.inverse()(p), closed=closed, tol=tol)

    def on_component(self, p: Point, which: str, tol: float = BOUNDARY_TOL):
        """Membership in the source boundary components ``"start"`` / ``"end"``."""
        s, d1, d2 = self.foliation.locate(p)
        level = {"start": self.foliation.c, "end": self.foliation.d}[which]
        (l1, h1), (l2, h2) = self.foliation.delta_bounds
        return ((np.abs(s - level) <= tol * (1 + abs(level)))
                & (d1 >= l1 - tol) & (d1 <= h1 + tol) & (d2 >= l2 - tol) & (d2 <= h2 + tol))

    def on_image_component(self, p: Point, which: str, tol: float = BOUNDARY_TOL):
        """Membership in the image components: the level set equation of the
        target component together with the preimage lying on the source one."""
        value = self.image_level_values[0 if which == "start" else 1]
        on_level = np.abs(self.image_level(p) - value) <= tol * (1 + abs(value))
        return on_level & self.on_component(self.stretch.inverse()(p), which, tol=1e3 * tol)

    def sample_component(self, which: str, n: int, seed: int = 0) -> Point:
        rng = np.random.default_rng(seed)
        (l1, h1), (l2, h2) = self.foliation.delta_bounds
        d1 = l1 + (h1 - l1) * rng.random(n)
        d2 = l2 + (h2 - l2) * rng.random(n)
        s = np.full(n, self.foliation.c if which == "start" else self.foliation.d)
        return self.foliation.curve_map(s, d1, d2)

    def describe(self) -> dict:
        out = {"kind": self.kind, "k": self.k, "mod_gamma0": self.mod_gamma0, "volume": self.volume}
        if self.kind == "radial":
            out.update(r0=self.r0, psi0=self.psi0)
        return out


def _linear_lt1(k: float) -> Scenario:
    def curve_map(s, a, lam):
        return Point(a + s / (2 * lam), lam, s)

    def velocity(s, a, lam):
        s, a, lam = np.broadcast_arrays(s, a, lam)
        return Tangent(1 / (2 * lam), np.zeros_like(s), np.ones_like(s))

    def locate(p):
        return p.t, p.a - p.t / (2 * p.lam), p.lam

    fol = Foliation(0.0, 1.0, ((0.0, 1.0), (0.5, 1.0)), curve_map, velocity,
                    lambda a, lam: 16.0 * lam**2, locate, volume=1.0, label="linear k<1")
    rho0 = Density(lambda p: 2.0 * p.lam, lambda p: fol.contains(p, closed=True, tol=1e-12), "rho0")

    def base(a, lam0):
        return (a, lambda s: np.full_like(s, lam0), np.zeros_like,
                lambda s: np.asarray(s, dtype=float), np.ones_like)

    return Scenario("linear_k_lt_1", k, fol, rho0, linear_stretch(k), 14.0 / 3.0,
                    PathModel("cartesian", base, (0.5, 1.0)), lambda p: p.t, (0.0, k))


GT1_C = 3.0 / 2.0 ** (1.0 / 3.0)
GT1_D = 3.0
GT1_C0 = 2.0 ** (4.0 / 3.0) / (3.0 * (2.0 ** (1.0 / 3.0) - 1.0))


def _linear_gt1(k: float) -> Scenario:
    def curve_map(s, a, t):
        return Point(a, np.asarray(s, dtype=float) ** 3 / 27.0, t)

    def velocity(s, a, t):
        s, a, t = np.broadcast_arrays(s, a, t)
        zero = np.zeros_like(s)
        return Tangent(zero, s**2 / 9.0, zero)

    def locate(p):
        return 3.0 * np.cbrt(p.lam), p.a, p.t

    fol = Foliation(GT1_C, GT1_D, ((0.0, 1.0), (0.0, 1.0)), curve_map, velocity,
                    lambda a, t: np.full(np.broadcast(a, t).shape, 16.0), locate,
                    volume=1.0, label="linear k>1")
    rho0 = Density(lambda p: GT1_C0 * np.cbrt(p.lam),
                   lambda p: fol.contains(p, closed=True, tol=1e-12), "rho0")
    mod = 2.0**5 / (3.0**3 * (2.0 ** (1.0 / 3.0) - 1.0) ** 3)

    def base(a, t0):
        return (a, lambda s: np.asarray(s, dtype=float) ** 3 / 27.0,
                lambda s: np.asarray(s, dtype=float) ** 2 / 9.0,
                lambda s: np.full_like(s, t0), np.zeros_like)

    return Scenario("linear_k_gt_1", k, fol, rho0, linear_stretch(k), mod,
                    PathModel("cartesian", base, (0.5, 1.0)), lambda p: p.lam, (0.5, 1.0))


def radial_modulus(r0: float, psi0: float) -> float:
    return (2.0 / np.log(r0)) ** 3 * (psi0 + np.sin(psi0) * np.cos(psi0))


def _radial(k: float, r0: float, psi0: float) -> Scenario:
    L = float(np.log(r0))

    def curve_map(s, a, psi):
        s = np.asarray(s, dtype=float)
        return from_logcyl(LogCylPoint(a + s * np.tan(psi) / 2, s, psi))

    def velocity(s, a, psi):
        s, a, psi = np.broadcast_arrays(s, a, psi)
        e = np.exp(s)
        return Tangent(np.tan(psi) / 2, e * np.cos(psi), e * np.sin(psi))

    def locate(p):
        q = to_logcyl(p)
        return q.xi, q.a - q.xi * np.tan(q.psi) / 2, q.psi

    fol = Foliation(0.0, L, ((0.0, 1.0), (0.0, psi0)), curve_map, velocity,
                    lambda a, psi: 16.0 * np.cos(psi) ** 2 + 0.0 * a, locate,
                    volume=L * float(np.tan(psi0)), label="radial")

    def rho_eval(p):
        return 2.0 * p.lam / np.hypot(p.lam, p.t) / L

    rho0 = Density(rho_eval, lambda p: fol.contains(p, closed=True, tol=1e-12), "rho0")

    def base(a, psi_0):
        return (a, lambda s: np.asarray(s, dtype=float), np.ones_like,
                lambda s: np.full_like(s, psi_0), np.zeros_like)

    return Scenario("radial", k, fol, rho0, radial_stretch(k), radial_modulus(r0, psi0),
                    PathModel("logcyl", base, (L, psi0)),
                    lambda p: np.log(np.hypot(p.lam, p.t)), (0.0, k * L), r0=r0, psi0=psi0)


def make_scenario(kind: str, k: float, r0: Optional[float] = None,
                  psi0: Optional[float] = None) -> Scenario:
    """Build a scenario.  ``k = 1`` is accepted for every kind as the
    degenerate identity case."""
    kind = canonical_kind(kind)
    if not (np.isfinite(k) and k > 0):
        raise InvalidParameters("k must be a positive number")
    if kind == "linear_k_lt_1":
        if k > 1:
            raise InvalidParameters("linear_k_lt_1 needs 0 < k <= 1")
        return _linear_lt1(k)
    if kind == "linear_k_gt_1":
        if k < 1:
            raise InvalidParameters("linear_k_gt_1 needs k >= 1")
        return _linear_gt1(k)
    r0 = np.e if r0 is None else float(r0)
    psi0 = np.pi / 4 if psi0 is None else float(psi0)
    if k > 1:
        raise InvalidParameters("radial needs 0 < k <= 1")
    if not r0 > 1:
        raise InvalidParameters("radial needs r0 > 1")
    if not 0 < psi0 <= np.pi / 2 - PSI0_MARGIN:
        raise InvalidParameters(f"radial needs 0 < psi0 <= pi/2 - {PSI0_MARGIN:g}")
    return _radial(k, r0, psi0)


def load_config(path) -> dict:
    """Read a JSON scenario config ``{kind, k, r0, psi0, grid, curves, tolerances}``."""
    with open(Path(path)) as fh:
        cfg = json.load(fh)
    if "kind" not in cfg or "k" not in cfg:
        raise InvalidParameters("config needs at least 'kind' and 'k'")
    return cfg


def scenario_from_config(cfg: dict) -> Scenario:
    return make_scenario(cfg["kind"], float(cfg["k"]), cfg.get("r0"), cfg.get("psi0"))


# ---------------------------------------------------------------- connecting families


def stratified_deltas(bounds, n: int, m: int, rng: np.random.Generator):
    """``n`` transverse parameters: one jittered sample in each of the ``m x m``
    columns (a random subset if ``n < m^2``) and uniform extras beyond."""
    (l1, h1), (l2, h2) = bounds
    cols = m * m
    if n >= cols:
        idx = np.concatenate([np.arange(cols), rng.integers(0, cols, n - cols)])
    else:
        idx = rng.choice(cols, n, replace=False)
    i, j = np.divmod(idx, m)
    d1 = l1 + (h1 - l1) * (i + rng.random(n)) / m
    d2 = l2 + (h2 - l2) * (j + rng.random(n)) / m
    return d1, d2


_GL_X, _GL_W = np.polynomial.legendre.leggauss(40)


def _perturbed_curve(sc: Scenario, d1: float, d2: float, cx, cy, eps: float) -> HorizontalCurve:
    fol, paths = sc.foliation, sc.paths
    c, d = fol.c, fol.d
    a0, x0, dx0, y0, dy0 = paths.base(d1, d2)
    modes = np.arange(1, len(cx) + 1)
    sx, sy = eps * paths.spans[0] * np.asarray(cx), eps * paths.spans[1] * np.asarray(cy)

    def bump(s, coef):
        u = (np.asarray(s, dtype=float)[..., None] - c) / (d - c)
        return np.sum(coef * np.sin(np.pi * modes * u), axis=-1)

    def dbump(s, coef):
        u = (np.asarray(s, dtype=float)[..., None] - c) / (d - c)
        return np.sum(coef * np.pi * modes / (d - c) * np.cos(np.pi * modes * u), axis=-1)

    def planar(s):
        s = np.asarray(s, dtype=float)
        return (x0(s) + bump(s, sx), dx0(s) + dbump(s, sx),
                y0(s) + bump(s, sy), dy0(s) + dbump(s, sy))

    def a_of(s):
        s = np.asarray(s, dtype=float)
        half = 0.5 * (s - c)
        u = c + half[..., None] * (1.0 + _GL_X)
        rate = paths.a_rate(*planar(u))
        return a0 + np.sum(half[..., None] * _GL_W * rate, axis=-1)

    def position(s):
        x, _, y, _ = planar(s)
        return a_of(s), x, y

    def velocity(s):
        x, dx, y, dy = planar(s)
        return paths.a_rate(x, dx, y, dy), dx, dy

    return HorizontalCurve(c, d, position, velocity, paths.chart,
                           f"{sc.kind} curve ({d1:.6g}, {d2:.6g}, eps={eps:.3g})")


def _curve_ok(sc: Scenario, curve: HorizontalCurve, n: int = 257) -> bool:
    s = np.linspace(curve.c, curve.d, n)
    try:
        p = curve.point(s)
    except ValueError:
        return False
    inner = sc.contains(p[1:-1])
    if not np.all(inner):
        return False
    return bool(sc.on_component(p[0], "start")) and bool(sc.on_component(p[-1], "end"))


def sample_connecting_family(sc: Scenario, n_curves: int, perturbation: float = 0.0,
                             seed: int = 0, modes: int = 3,
                             max_halvings: int = 30) -> list[HorizontalCurve]:
    """Horizontal curves in the scenario domain joining its two boundary components.

    With ``perturbation = 0`` these are fibers of the extremal foliation at
    stratified transverse parameters.  Otherwise the planar projection of each
    fiber receives a random sinusoidal perturbation vanishing at both ends,
    with relative amplitude ``perturbation``; the a-coordinate is recovered by
    integrating the horizontality o.d.e.  Amplitudes are halved until the
    curve stays inside the domain.
    """
    if n_curves < 1:
        raise ValueError("n_curves must be at least 1")
    rng = np.random.default_rng(seed)
    m = max(1, int(np.floor(np.sqrt(n_curves))))
    d1s, d2s = stratified_deltas(sc.foliation.delta_bounds, n_curves, m, rng)
    curves = []
    for d1, d2 in zip(d1s, d2s):
        if perturbation == 0:
            curves.append(sc.foliation.fiber(float(d1), float(d2)))
            continue
        cx = rng.uniform(-1, 1, modes) / np.arange(1, modes + 1)
        cy = rng.uniform(-1, 1, modes) / np.arange(1, modes + 1)
        eps = float(perturbation)
        for _ in range(max_halvings):
            curve = _perturbed_curve(sc, float(d1), float(d2), cx, cy, eps)
            if _curve_ok(sc, curve):
                break
            eps *= 0.5
        else:
            raise PerturbationLeavesDomain(
                f"perturbed curve at ({d1:.6g}, {d2:.6g}) never fits inside the domain")
        curves.append(curve)
    return curves
