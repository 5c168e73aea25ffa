"""Conformal metrics on a disc and their unit-speed geodesics.

All surfaces are discs ``|x| <= radius`` carrying ``g = c(x) |dx|^2`` with
``c = exp(2 lam)``.  Directions are given by the chart angle ``theta``; the
unit vector at ``x`` is ``exp(-lam) (cos theta, sin theta)``.

Boundary points are written ``(phi, psi)`` with ``phi`` the polar angle of the
base point and ``psi`` the angle of the direction measured from the inward
normal, so ``theta = phi + pi + psi``.  Inflow directions have ``|psi| < pi/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import ConfigError, ExitedDomain, TrapBudgetExceeded

TWO_PI = 2.0 * np.pi

_KIND_CODE = {"euclidean": 0.0, "constant_curvature": 1.0, "perturbed": 2.0}


@dataclass(frozen=True)
class MetricModel:
    """Conformal metric on the disc of given radius.

    Parameters
    ----------
    kind : {"euclidean", "constant_curvature", "perturbed"}
    kappa : float
        Curvature of the constant curvature factor ``4 / (1 + kappa r^2)^2``.
        ``kappa = 0`` uses the factor 1 instead, i.e. the Euclidean metric.
    radius : float
    epsilon : float
        Strength of the perturbation; ``c`` is multiplied by ``exp(epsilon * bump)``.
    bump_center, bump_width :
        The bump is ``(1 - r^2/R^2)^2 exp(-|x - center|^2 / (2 width^2))``,
        which vanishes together with its gradient on the boundary.
    """

    kind: str = "euclidean"
    kappa: float = 0.0
    radius: float = 1.0
    epsilon: float = 0.0
    bump_center: tuple = (0.0, 0.0)
    bump_width: float = 0.3

    # largest admissible |epsilon|; keeps the Neumann series for (Id + iW) convergent
    EPS_MAX = 0.2

    def __post_init__(self):
        if self.kind not in _KIND_CODE:
            raise ConfigError(f"unknown metric kind {self.kind!r}")
        if not self.radius > 0:
            raise ConfigError("radius must be positive")
        if self.kind == "euclidean" and (self.kappa != 0.0 or self.epsilon != 0.0):
            raise ConfigError("euclidean metric takes no kappa or epsilon")
        if abs(self.kappa) * self.radius ** 2 >= 1.0:
            raise ConfigError(
                f"|kappa| * radius^2 = {abs(self.kappa) * self.radius ** 2:.3g} must be < 1"
            )
        if self.kind == "perturbed":
            if abs(self.epsilon) > self.EPS_MAX:
                raise ConfigError(f"|epsilon| must not exceed {self.EPS_MAX}")
            if not self.bump_width > 0:
                raise ConfigError("bump_width must be positive")
        object.__setattr__(self, "bump_center", tuple(float(v) for v in self.bump_center))

    # -- constructors -------------------------------------------------------
    @classmethod
    def euclidean(cls, radius=1.0):
        return cls("euclidean", 0.0, radius)

    @classmethod
    def constant_curvature(cls, kappa, radius=1.0):
        if kappa == 0.0:
            return cls.euclidean(radius)
        return cls("constant_curvature", float(kappa), radius)

    @classmethod
    def perturbed(cls, kappa=0.0, epsilon=0.02, center=(0.1, -0.1), width=0.3, radius=1.0):
        return cls("perturbed", float(kappa), radius, float(epsilon), tuple(center), float(width))

    @classmethod
    def from_dict(cls, d: dict) -> "MetricModel":
        kind = d.get("kind", "euclidean").lower().replace("-", "_")
        aliases = {"constantcurvature": "constant_curvature", "cc": "constant_curvature"}
        kind = aliases.get(kind, kind)
        bump = d.get("bump_spec") or {}
        return cls(
            kind,
            float(d.get("kappa", 0.0)),
            float(d.get("radius", 1.0)),
            float(d.get("epsilon", 0.0)),
            tuple(bump.get("center", (0.0, 0.0))),
            float(bump.get("width", 0.3)),
        )

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "kappa": self.kappa, "radius": self.radius}
        if self.kind == "perturbed":
            d["epsilon"] = self.epsilon
            d["bump_spec"] = {"center": list(self.bump_center), "width": self.bump_width}
        return d

    # -- queries ------------------------------------------------------------
    @property
    def is_constant_curvature(self) -> bool:
        return self.kind != "perturbed" or self.epsilon == 0.0

    def params(self, origin=0.0, step=1.0) -> np.ndarray:
        """Flat parameter vector consumed by the compiled kernels."""
        return np.array(
            [
                _KIND_CODE[self.kind],
                self.kappa,
                self.epsilon,
                self.bump_center[0],
                self.bump_center[1],
                self.bump_width,
                self.radius,
                origin,
                step,
            ]
        )

    def log_factor(self, x, y):
        """Return ``lam`` and its chart gradient ``(lam_x, lam_y)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = x * x + y * y
        den = 1.0 + self.kappa * r2
        if self.kappa != 0.0:
            lam = math.log(2.0) - np.log(den)
        else:
            lam = np.zeros_like(r2)
        lx = -2.0 * self.kappa * x / den
        ly = -2.0 * self.kappa * y / den
        if self.kind == "perturbed":
            cx, cy = self.bump_center
            w2 = self.bump_width ** 2
            R2 = self.radius ** 2
            gau = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * w2))
            sb = np.clip(1.0 - r2 / R2, 0.0, None)
            lam = lam + 0.5 * self.epsilon * sb ** 2 * gau
            lx = lx + 0.5 * self.epsilon * (-4 * sb * x / R2 * gau - sb ** 2 * gau * (x - cx) / w2)
            ly = ly + 0.5 * self.epsilon * (-4 * sb * y / R2 * gau - sb ** 2 * gau * (y - cy) / w2)
        return lam, lx, ly

    def conformal_factor(self, x, y):
        return np.exp(2.0 * self.log_factor(x, y)[0])

    def christoffel(self, x, y) -> np.ndarray:
        """Christoffel symbols ``G[k, i, j]`` at one point."""
        _, lx, ly = self.log_factor(x, y)
        d = np.array([float(lx), float(ly)])
        G = np.zeros((2, 2, 2))
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    G[k, i, j] = (k == i) * d[j] + (k == j) * d[i] - (i == j) * d[k]
        return G

    def gaussian_curvature(self, x, y, h=1e-3):
        """Curvature ``-exp(-2 lam) Lap(lam)`` with a five point Laplacian."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lam = lambda a, b: self.log_factor(a, b)[0]
        lap = (lam(x + h, y) + lam(x - h, y) + lam(x, y + h) + lam(x, y - h) - 4 * lam(x, y)) / h ** 2
        return -np.exp(-2.0 * lam(x, y)) * lap

    def default_step(self) -> float:
        return 0.01 * self.radius


@dataclass(frozen=True)
class BundlePoint:
    x: float
    y: float
    theta: float

    @property
    def point(self):
        return np.array([self.x, self.y])


@dataclass
class GeodesicTrace:
    """Sampled geodesic with Riemannian times.

    ``samples[i] = (x, y, theta)`` at time ``times[i]``; the last sample is the
    exit point.  ``entry`` is set only when the start lies on the boundary.
    """

    samples: np.ndarray
    times: np.ndarray
    exit_time: float
    exit: tuple
    entry: Optional[tuple] = None
    step: float = field(default=0.0)


# -- boundary coordinates ------------------------------------------------------
def wrap_angle(a):
    """Map angles into ``[-pi, pi)``."""
    return (np.asarray(a) + np.pi) % TWO_PI - np.pi


def boundary_point(metric: MetricModel, phi, psi):
    """Chart position and direction angle of the boundary vector ``(phi, psi)``."""
    R = metric.radius
    phi = np.asarray(phi, dtype=float)
    return R * np.cos(phi), R * np.sin(phi), np.mod(phi + np.pi + psi, TWO_PI)


def to_boundary_coords(x, y, theta):
    """Inverse of :func:`boundary_point` for points on the circle."""
    phi = np.mod(np.arctan2(y, x), TWO_PI)
    return phi, wrap_angle(theta - phi - np.pi)


# -- flows -------------------------------------------------------------------
def _as_arrays(*vals):
    return [np.atleast_1d(np.asarray(v, dtype=float)).ravel() for v in vals]


def trace_many(metric: MetricModel, x, y, theta, h=None, tol=1e-10, max_steps=None):
    """Forward-trace many states to the boundary.

    Returns
    -------
    tau : ndarray
        Riemannian exit times.
    exit : ndarray, shape (n, 3)
        Exit states ``(x, y, theta)``.
    """
    x, y, theta = _as_arrays(x, y, theta)
    h = metric.default_step() if h is None else h
    if max_steps is None:
        max_steps = int(20 * metric.radius / h) + 10
    n = x.size
    empty_c = np.zeros((0, 1, 4, 4), complex)
    empty_f = np.zeros((0, 1, 4, 4), complex)
    out_int = np.zeros((n, 0), complex)
    tau = np.zeros(n)
    ex = np.zeros((n, 3))
    att = np.zeros(n, complex)
    trapped = K.trace_rays(
        x, y, theta, metric.params(), h, tol, max_steps,
        empty_c, 0, empty_f, np.zeros((4, 4), complex), False,
        out_int, tau, ex, att,
    )
    if trapped:
        raise TrapBudgetExceeded(f"{trapped} geodesics did not exit within {max_steps} steps")
    ex[:, 2] = np.mod(ex[:, 2], TWO_PI)
    return tau, ex


def flow(metric: MetricModel, p: BundlePoint, t: float, h=None) -> BundlePoint:
    """Geodesic flow ``phi_t(p)`` for Riemannian time ``t`` (either sign).

    Raises
    ------
    ExitedDomain
        If the geodesic crosses the boundary before time ``t``.
    """
    h = metric.default_step() if h is None else h
    theta = p.theta if t >= 0 else p.theta + np.pi
    tau = exit_time(metric, BundlePoint(p.x, p.y, theta), h=h)
    if abs(t) > tau * (1 + 1e-12) + 1e-12:
        raise ExitedDomain(np.sign(t) * tau if t else 0.0, t)
    out = np.zeros((1, 3))
    K.flow_time(np.array([p.x]), np.array([p.y]), np.array([p.theta]), metric.params(), float(t), h, out)
    return BundlePoint(float(out[0, 0]), float(out[0, 1]), float(np.mod(out[0, 2], TWO_PI)))


def flow_many(metric: MetricModel, x, y, theta, t, h=None):
    """Vectorised flow without the domain check; returns an ``(n, 3)`` array."""
    x, y, theta = _as_arrays(x, y, theta)
    h = metric.default_step() if h is None else h
    out = np.zeros((x.size, 3))
    K.flow_time(x, y, theta, metric.params(), float(t), h, out)
    return out


def exit_time(metric: MetricModel, p: BundlePoint, h=None, tol=1e-10, max_steps=None) -> float:
    """Riemannian time until the geodesic from ``p`` leaves the disc."""
    tau, _ = trace_many(metric, p.x, p.y, p.theta, h=h, tol=tol, max_steps=max_steps)
    return float(tau[0])


def trace(metric: MetricModel, p: BundlePoint, h=None, tol=1e-10, max_steps=None) -> GeodesicTrace:
    h = metric.default_step() if h is None else h
    if max_steps is None:
        max_steps = int(20 * metric.radius / h) + 10
    buf = np.zeros((max_steps + 2, 4))
    n = K.trace_path(p.x, p.y, p.theta, metric.params(), h, tol, max_steps, buf)
    if n < 0:
        raise TrapBudgetExceeded(f"geodesic did not exit within {max_steps} steps")
    buf = buf[:n]
    samples = buf[:, :3].copy()
    samples[:, 2] = np.mod(samples[:, 2], TWO_PI)
    xe, ye, te = samples[-1]
    entry = None
    R = metric.radius
    if abs(math.hypot(p.x, p.y) - R) < 1e-9 * R:
        entry = tuple(float(v) for v in np.ravel(to_boundary_coords(p.x, p.y, p.theta)))
    exit_ = tuple(float(v) for v in np.ravel(to_boundary_coords(xe, ye, te)))
    return GeodesicTrace(samples, buf[:, 3].copy(), float(buf[-1, 3]), exit_, entry, h)


def scattering(metric: MetricModel, phi, psi, h=None, tol=1e-10):
    """Scattering relation on the boundary in ``(phi, psi)`` coordinates.

    Inflow vectors are sent to the exit point and direction of their geodesic.
    Outflow vectors are sent backwards along their geodesic to where it
    entered, so the map is an involution.  Tangent vectors are fixed.
    """
    phi, psi = _as_arrays(phi, psi)
    psi = wrap_angle(psi)
    x, y, th = boundary_point(metric, phi, psi)
    inflow = np.abs(psi) < np.pi / 2
    th_trace = np.where(inflow, th, th + np.pi)
    _, ex = trace_many(metric, x, y, th_trace, h=h, tol=tol)
    th_out = np.where(inflow, ex[:, 2], ex[:, 2] + np.pi)
    phi_out, psi_out = to_boundary_coords(ex[:, 0], ex[:, 1], th_out)
    return phi_out, psi_out


def tau_minus(metric: MetricModel, phi, psi, h=None, tol=1e-10):
    """Half exit time for inflow vectors, minus half the reversed one for outflow."""
    phi, psi = _as_arrays(phi, psi)
    psi = wrap_angle(psi)
    x, y, th = boundary_point(metric, phi, psi)
    inflow = np.abs(psi) < np.pi / 2
    tau, _ = trace_many(metric, x, y, np.where(inflow, th, th + np.pi), h=h, tol=tol)
    tangent = np.isclose(np.abs(psi), np.pi / 2, atol=1e-14)
    return np.where(tangent, 0.0, np.where(inflow, 0.5 * tau, -0.5 * tau))


def santalo_weight(psi):
    """``mu = cos(psi)`` for inflow vectors, clipped at zero."""
    return np.clip(np.cos(psi), 0.0, None)


def hyperbolic_radius(kappa, t):
    """Chart radius reached by a radial geodesic from the origin after time ``t``.

    Closed form for the factor ``4 / (1 + kappa r^2)^2``; used as an oracle.
    ``kappa = 0`` means the Euclidean factor 1 (see :class:`MetricModel`).
    """
    if kappa < 0:
        s = math.sqrt(-kappa)
        return math.tanh(s * t / 2.0) / s
    if kappa > 0:
        s = math.sqrt(kappa)
        return math.tan(s * t / 2.0) / s
    return t
