"""Functions on the unit sphere bundle and on its boundary.

A :class:`BundleField` samples ``u(x, theta)`` on grid nodes times the uniform
angular grid ``theta_k = 2 pi k / n_theta``.  Angular Fourier coefficients are
``u_k(x) = (1/n_theta) sum_l u(x, theta_l) exp(-i k theta_l)`` with signed
``k`` in ``[-n_theta/2, n_theta/2)``.

For the conformal metric ``exp(2 lam)|dx|^2`` the geodesic vector field splits
as ``X = eta_+ + eta_-`` with

    (eta_+ u)_{k+1} = exp(-lam) (d - k d lam) u_k
    (eta_- u)_{k-1} = exp(-lam) (dbar + k dbar lam) u_k

where ``d = (d_x - i d_y)/2``.  The perpendicular field (direction rotated
clockwise) is ``X_perp = -i (eta_+ - eta_-)``; on functions
``X_perp f = exp(-lam) (sin(theta) f_x - cos(theta) f_y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import OutsideDomain
from .geometry import MetricModel, TWO_PI, flow_many
from .grid import DiscGrid, ScalarField

# multiplier used by :func:`hilbert`; the self-test mutates it as a negative control
_HILBERT_SIGN = 1.0


def signed_modes(n):
    return np.rint(np.fft.fftfreq(n) * n).astype(int)


def _check_ntheta(n):
    if n < 4 or n & (n - 1):
        raise ValueError(f"n_theta must be a power of two >= 4, got {n}")


@dataclass
class BundleField:
    """Complex samples ``values[i, k] = u(x_i, theta_k)`` on the sphere bundle."""

    grid: DiscGrid
    values: np.ndarray
    metric: Optional[MetricModel] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[0] != self.grid.n_nodes:
            raise ValueError("values must have one row per grid node")
        _check_ntheta(self.values.shape[1])

    @property
    def ntheta(self):
        return self.values.shape[1]

    @property
    def theta(self):
        return TWO_PI * np.arange(self.ntheta) / self.ntheta

    @classmethod
    def from_function(cls, grid, ntheta, fn, metric=None):
        th = TWO_PI * np.arange(ntheta) / ntheta
        vals = fn(grid.x[:, None], grid.y[:, None], th[None, :])
        return cls(grid, np.broadcast_to(vals, (grid.n_nodes, ntheta)).astype(complex), metric)

    @classmethod
    def from_scalar(cls, f, ntheta, metric=None):
        v = f.values if isinstance(f, ScalarField) else np.asarray(f)
        grid = f.grid
        return cls(grid, np.repeat(np.asarray(v, complex)[:, None], ntheta, axis=1), metric)

    @classmethod
    def from_modes(cls, grid, coeffs, metric=None):
        n = coeffs.shape[1]
        return cls(grid, np.fft.ifft(coeffs, axis=1) * n, metric)

    def like(self, values):
        return BundleField(self.grid, values, self.metric)

    def modes(self):
        return angular_fourier(self)

    def __add__(self, o):
        return self.like(self.values + _v(o))

    def __sub__(self, o):
        return self.like(self.values - _v(o))

    def __mul__(self, o):
        return self.like(self.values * _v(o))

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)


@dataclass
class BoundaryField:
    """Complex samples on the boundary of the sphere bundle.

    ``values[j, k]`` is the value at boundary angle ``phi_j = 2 pi j / n`` and
    direction ``theta_k = 2 pi k / n``; both grids have the same size ``n``.
    """

    values: np.ndarray
    radius: float = 1.0
    metric: Optional[MetricModel] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        n0, n1 = self.values.shape
        if n0 != n1:
            raise ValueError("boundary fields use n_phi == n_theta")
        _check_ntheta(n1)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def ntheta(self):
        return self.n

    @property
    def phi(self):
        return TWO_PI * np.arange(self.n) / self.n

    @property
    def theta(self):
        return self.phi

    @property
    def psi(self):
        """``psi[j, k] = theta_k - phi_j - pi`` wrapped to ``[-pi, pi)``."""
        d = (np.arange(self.n)[None, :] - np.arange(self.n)[:, None] - self.n // 2) % self.n
        d = np.where(d >= self.n // 2, d - self.n, d)
        return TWO_PI * d / self.n

    @property
    def inflow_mask(self):
        """Strictly inflow nodes; tangent directions count as outflow."""
        return np.abs(self.psi) < np.pi / 2 - 1e-12

    @classmethod
    def zeros(cls, n, radius=1.0, metric=None):
        return cls(np.zeros((n, n), complex), radius, metric)

    @classmethod
    def from_function(cls, n, fn, radius=1.0, metric=None):
        """Build from ``fn(phi, psi)``, evaluated at every node."""
        b = cls.zeros(n, radius, metric)
        phi = b.phi[:, None] + 0 * b.psi
        b.values = np.asarray(fn(phi, b.psi), dtype=complex)
        return b

    def like(self, values):
        return BoundaryField(values, self.radius, self.metric)

    # inflow re-indexing: row j, column m holds psi_m = -pi/2 + 2 pi m / n
    def _inflow_cols(self):
        n = self.n
        j = np.arange(n)[:, None]
        m = np.arange(n // 2 + 1)[None, :]
        return (j + m + n // 4) % n

    @property
    def inflow_psi(self):
        return -np.pi / 2 + TWO_PI * np.arange(self.n // 2 + 1) / self.n

    def inflow_table(self) -> np.ndarray:
        """Values on ``(phi_j, psi_m)``, ``m = 0..n/2``; the end columns are tangent."""
        return np.take_along_axis(self.values, self._inflow_cols(), axis=1)

    @classmethod
    def from_inflow_table(cls, tab, radius=1.0, metric=None):
        """Inverse of :meth:`inflow_table`; outflow and tangent nodes are set to zero."""
        n = tab.shape[0]
        b = cls.zeros(n, radius, metric)
        cols = b._inflow_cols()[:, 1:-1]
        np.put_along_axis(b.values, cols, np.asarray(tab)[:, 1:-1], axis=1)
        return b

    def restrict_inflow(self):
        """Zero outside strict inflow, as used for measured data."""
        return self.like(np.where(self.inflow_mask, self.values, 0.0))

    def __add__(self, o):
        return self.like(self.values + _v(o))

    def __sub__(self, o):
        return self.like(self.values - _v(o))

    def __mul__(self, o):
        return self.like(self.values * _v(o))

    __rmul__ = __mul__


def _v(o):
    return o.values if isinstance(o, (BundleField, BoundaryField, ScalarField)) else o


# -- fibrewise spectral operations -------------------------------------------
def angular_fourier(u):
    """Angular Fourier coefficients, FFT ordered along the last axis."""
    v = _v(u)
    return np.fft.fft(v, axis=-1) / v.shape[-1]


def inverse_angular_fourier(coeffs):
    return np.fft.ifft(coeffs, axis=-1) * coeffs.shape[-1]


def _rewrap(u, values):
    return u.like(values) if hasattr(u, "like") else values


def hilbert(u):
    """Fibrewise Hilbert transform: mode ``k`` times ``-i sgn(k)``.

    The mean and the unresolved Nyquist mode are sent to zero.
    """
    v = _v(u)
    n = v.shape[-1]
    k = signed_modes(n)
    mult = -1j * np.sign(k) * _HILBERT_SIGN
    mult[k == -n // 2] = 0.0
    out = np.fft.ifft(np.fft.fft(v, axis=-1) * mult, axis=-1)
    return _rewrap(u, out)


def parity_split(u):
    """Even and odd parts under ``theta -> theta + pi``."""
    v = _v(u)
    n = v.shape[-1]
    flip = np.roll(v, -(n // 2), axis=-1)
    return _rewrap(u, 0.5 * (v + flip)), _rewrap(u, 0.5 * (v - flip))


def holo_project(u, sign=1):
    """``(Id + i sign H) u``: keeps the mean, doubles one side and kills the other."""
    v = _v(u)
    hv = _v(hilbert(v))
    return _rewrap(u, v + 1j * sign * hv)


def average(u):
    """Angular mean; a :class:`ScalarField` for bundle fields."""
    v = _v(u)
    m = v.mean(axis=-1)
    if isinstance(u, BundleField):
        return ScalarField(u.grid, m)
    return m


# -- differential operators on whole fields ----------------------------------
def _metric_terms(grid, metric):
    lam, lx, ly = metric.log_factor(grid.x, grid.y)
    return np.exp(-lam), 0.5 * (lx - 1j * ly), 0.5 * (lx + 1j * ly)


def eta_split(u: BundleField, metric: MetricModel = None):
    """Return ``(eta_+ u, eta_- u)`` as coefficient arrays (FFT ordered)."""
    metric = metric or u.metric or MetricModel.euclidean(u.grid.radius)
    g = u.grid
    C = angular_fourier(u)
    n = C.shape[1]
    k = signed_modes(n)
    DxC = g.d_dx @ C
    DyC = g.d_dy @ C
    dC = 0.5 * (DxC - 1j * DyC)
    dbC = 0.5 * (DxC + 1j * DyC)
    eml, dl, dbl = _metric_terms(g, metric)
    plus_src = eml[:, None] * (dC - k[None, :] * dl[:, None] * C)
    minus_src = eml[:, None] * (dbC + k[None, :] * dbl[:, None] * C)
    nyq = k == -n // 2
    plus_src[:, nyq] = 0.0
    minus_src[:, nyq] = 0.0
    plus = np.roll(plus_src, 1, axis=1)  # mode k -> k+1
    minus = np.roll(minus_src, -1, axis=1)  # mode k -> k-1
    plus[:, nyq] = 0.0
    minus[:, nyq] = 0.0
    return plus, minus


def geodesic_field_derivative(u: BundleField, metric: MetricModel = None) -> BundleField:
    """``X u`` on every node by angular modes and fourth order differences."""
    p, m = eta_split(u, metric)
    return u.like(inverse_angular_fourier(p + m))


def perp_field_derivative(u: BundleField, metric: MetricModel = None) -> BundleField:
    p, m = eta_split(u, metric)
    return u.like(inverse_angular_fourier(-1j * (p - m)))


def scalar_geodesic_derivative(f, ntheta, metric: MetricModel) -> BundleField:
    """``X f = exp(-lam)(cos f_x + sin f_y)`` for a function ``f``."""
    g = f.grid
    fx, fy = g.gradient(f.values)
    eml = np.exp(-metric.log_factor(g.x, g.y)[0])
    th = TWO_PI * np.arange(ntheta) / ntheta
    vals = eml[:, None] * (np.cos(th)[None] * fx[:, None] + np.sin(th)[None] * fy[:, None])
    return BundleField(g, vals, metric)


def scalar_perp_derivative(f, ntheta, metric: MetricModel) -> BundleField:
    g = f.grid
    fx, fy = g.gradient(f.values)
    eml = np.exp(-metric.log_factor(g.x, g.y)[0])
    th = TWO_PI * np.arange(ntheta) / ntheta
    vals = eml[:, None] * (np.sin(th)[None] * fx[:, None] - np.cos(th)[None] * fy[:, None])
    return BundleField(g, vals, metric)


# -- pointwise derivatives -----------------------------------------------------
def evaluate(u: BundleField, x, y, theta):
    """Bicubic in space, trigonometric in angle."""
    g = u.grid
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    theta = np.atleast_1d(np.asarray(theta, float))
    reach = g.radius + 1e-9
    if np.any(np.hypot(x, y) > reach + g.dx):
        raise OutsideDomain("evaluation point outside the disc")
    C = angular_fourier(u)
    full = g.extend(C)  # (ny, nx, n)
    arr = np.ascontiguousarray(np.moveaxis(full, -1, 0))
    out = np.zeros((x.size, C.shape[1]), complex)
    K.interp_grid_points(arr, x, y, g.origin, g.dx, out)
    k = signed_modes(C.shape[1])
    n = C.shape[1]
    keep = k != -n // 2
    return np.sum(out[:, keep] * np.exp(1j * np.outer(theta, k[keep])), axis=1)


def geodesic_derivative(u: BundleField, x, y, theta, delta=None, metric=None, h=None):
    """``X u`` at the given states by a central difference along the flow.

    ``delta`` is a Riemannian time and defaults to the grid spacing.  When the
    geodesic leaves the disc within ``2 delta`` on one side, a second order
    one-sided difference on the other side is used.
    """
    metric = metric or u.metric or MetricModel.euclidean(u.grid.radius)
    x, y, theta = (np.atleast_1d(np.asarray(v, float)) for v in (x, y, theta))
    if np.any(np.hypot(x, y) > metric.radius * (1 + 1e-12)):
        raise OutsideDomain("point outside the disc")
    delta = u.grid.dx if delta is None else delta
    h = h if h is not None else min(metric.default_step(), delta / 4)
    from .geometry import trace_many

    tau_f, _ = trace_many(metric, x, y, theta, h=h)
    tau_b, _ = trace_many(metric, x, y, theta + np.pi, h=h)
    out = np.zeros(x.size, complex)

    def at(t, sel):
        st = flow_many(metric, x[sel], y[sel], theta[sel], t, h=h)
        return evaluate(u, st[:, 0], st[:, 1], st[:, 2])

    central = (tau_f >= delta) & (tau_b >= delta)
    fwd = ~central & (tau_f >= 2 * delta)
    bwd = ~central & ~fwd & (tau_b >= 2 * delta)
    if np.any(~(central | fwd | bwd)):
        raise OutsideDomain("geodesic too short for a difference stencil")
    if central.any():
        out[central] = (at(delta, central) - at(-delta, central)) / (2 * delta)
    for sel, sgn in ((fwd, 1.0), (bwd, -1.0)):
        if sel.any():
            u0 = evaluate(u, x[sel], y[sel], theta[sel])
            out[sel] = sgn * (-3 * u0 + 4 * at(sgn * delta, sel) - at(sgn * 2 * delta, sel)) / (2 * delta)
    return out


def perp_derivative(u: BundleField, x, y, theta, delta=None, metric=None):
    """``X_perp u = (xi_perp)^j nabla_j u`` at the given states.

    With ``Gamma`` the Christoffel symbols of the conformal metric, the
    horizontal derivative along ``xi_perp`` reduces to

        exp(-lam) [sin f_x - cos f_y + (lam_x cos + lam_y sin) d_theta]

    applied to ``u``.  Spatial derivatives are central differences of the
    interpolant with step ``delta``; the angular derivative is spectral.
    """
    metric = metric or u.metric or MetricModel.euclidean(u.grid.radius)
    x, y, theta = (np.atleast_1d(np.asarray(v, float)) for v in (x, y, theta))
    delta = u.grid.dx if delta is None else delta
    ux = (evaluate(u, x + delta, y, theta) - evaluate(u, x - delta, y, theta)) / (2 * delta)
    uy = (evaluate(u, x, y + delta, theta) - evaluate(u, x, y - delta, theta)) / (2 * delta)
    ut = evaluate(BundleField(u.grid, _angular_derivative(u.values)), x, y, theta)
    lam, lx, ly = metric.log_factor(x, y)
    c, s = np.cos(theta), np.sin(theta)
    return np.exp(-lam) * (s * ux - c * uy + (lx * c + ly * s) * ut)


def _angular_derivative(v):
    n = v.shape[-1]
    k = signed_modes(n).astype(float)
    k[k == -n // 2] = 0.0
    return np.fft.ifft(np.fft.fft(v, axis=-1) * (1j * k), axis=-1)


def angular_derivative(u):
    return _rewrap(u, _angular_derivative(_v(u)))
