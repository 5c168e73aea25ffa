"""Transport along geodesics: ray transforms, their adjoints, and ``u^F``.

Everything is organised around :class:`Transport`, which owns one metric, one
spatial grid and one angular resolution.  Its first sphere-bundle pass stores
the exit time and exit state of every ``(x_i, theta_k)``; entry states are the
exit states of the reversed direction, which sits on the same grid because
``n_theta`` is even.  Later passes reuse that geometry for every quantity that
is constant along geodesics.

Quadrature uses a fixed chart step ``h`` that defaults to twice the grid
spacing.  It is independent of ``dx`` because integrands are smooth on the
scale of the phantoms while the tracing cost is proportional to ``1/h``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import _kernels as K
from .errors import SolverDiverged, TrapBudgetExceeded
from .geometry import MetricModel, TWO_PI, boundary_point, santalo_weight, to_boundary_coords
from .grid import DiscGrid, OneFormField, ScalarField
from .sphere_bundle import BoundaryField, BundleField, angular_fourier

_EMPTY_MODAL = np.zeros((0, 1, 4, 4), complex)
_EMPTY_FULL = np.zeros((0, 1, 4, 4), complex)


@dataclass
class _Geometry:
    tau: np.ndarray          # (N, n) Riemannian exit time
    exit_phi: np.ndarray     # (N, n)
    exit_theta: np.ndarray   # (N, n)

    def entry(self):
        """Entry boundary coordinates ``(phi, psi)`` and time since entry."""
        n = self.tau.shape[1]
        rev = np.roll(np.arange(n), -(n // 2))
        phi_in = self.exit_phi[:, rev]
        th_in = self.exit_theta[:, rev] + np.pi
        psi_in = np.mod(th_in - phi_in - np.pi + np.pi, TWO_PI) - np.pi
        return phi_in, psi_in, self.tau[:, rev]


@dataclass
class TransportStats:
    passes: int = 0
    rays: int = 0
    seconds: float = 0.0
    clamped_entries: int = 0
    log: list = field(default_factory=list)


class Transport:
    """Geodesic transport on one (metric, grid, angular grid) triple.

    Parameters
    ----------
    metric : MetricModel
    grid : DiscGrid
    ntheta : int
        Angular resolution, also the boundary resolution ``n_phi``.
    step_factor : float
        Chart step of the ray integrator in units of ``grid.dx``.
    tol : float
        Tolerance of the boundary crossing.
    """

    def __init__(self, metric: MetricModel, grid: DiscGrid, ntheta: int, step_factor=2.0, tol=1e-10):
        if abs(grid.radius - metric.radius) > 1e-12:
            raise ValueError("grid and metric radii differ")
        self.metric = metric
        self.grid = grid
        self.ntheta = int(ntheta)
        self.h = step_factor * grid.dx
        self.tol = tol
        self.mp = metric.params(grid.origin, grid.dx)
        self.max_steps = int(30 * metric.radius / self.h) + 20
        self._geom: Optional[_Geometry] = None
        self._bgeom = None
        self._lam = metric.log_factor(grid.x, grid.y)
        self.stats = TransportStats()

    # -- helpers ------------------------------------------------------------
    @property
    def theta(self):
        return TWO_PI * np.arange(self.ntheta) / self.ntheta

    @property
    def exp_lam(self):
        return np.exp(self._lam[0])

    def _sm_states(self):
        n = self.ntheta
        g = self.grid
        return np.repeat(g.x, n), np.repeat(g.y, n), np.tile(self.theta, g.n_nodes)

    def _boundary_states(self):
        """All boundary nodes; outflow directions reversed so they trace backwards."""
        b = BoundaryField.zeros(self.ntheta, self.metric.radius)
        inflow = b.inflow_mask
        phi = np.repeat(b.phi, self.ntheta)
        psi = b.psi.ravel()
        x, y, th = boundary_point(self.metric, phi, psi)
        th = np.where(inflow.ravel(), th, th + np.pi)
        return x, y, th, inflow

    def _padded_modal(self, coefs):
        """``coefs`` (nf, nm, N) node values -> padded (nf, nm, n_full, n_full)."""
        coefs = np.asarray(coefs, complex)
        nf, nm, _ = coefs.shape
        full = self.grid.extend(coefs.reshape(nf * nm, -1).T)  # (nF, nF, nf*nm)
        return np.ascontiguousarray(np.moveaxis(full, -1, 0).reshape(nf, nm, *full.shape[:2]))

    def _padded_full(self, values):
        """Bundle values (N, n) -> padded (1, n, n_full, n_full)."""
        full = self.grid.extend(np.asarray(values, complex))
        return np.ascontiguousarray(np.moveaxis(full, -1, 0)[None])

    def _padded_scalar(self, a):
        if a is None:
            return np.zeros((4, 4), complex), False
        v = a.values if isinstance(a, ScalarField) else np.asarray(a)
        v = np.broadcast_to(np.asarray(v, complex), (self.grid.n_nodes,))  # constants allowed
        return np.ascontiguousarray(self.grid.extend(v)), True

    def _trace(self, x, y, th, coef=_EMPTY_MODAL, m_lo=0, full=_EMPTY_FULL, atten=None):
        t0 = time.perf_counter()
        n = x.size
        nfield = coef.shape[0] + full.shape[0]
        out = np.zeros((n, nfield), complex)
        tau = np.zeros(n)
        ex = np.zeros((n, 3))
        att = np.zeros(n, complex)
        apad, use = self._padded_scalar(atten)
        trapped = K.trace_rays(
            x, y, th, self.mp, self.h, self.tol, self.max_steps,
            coef, int(m_lo), full, apad, use, out, tau, ex, att,
        )
        if trapped:
            raise TrapBudgetExceeded(f"{trapped} rays exceeded {self.max_steps} steps")
        dt = time.perf_counter() - t0
        self.stats.passes += 1
        self.stats.rays += n
        self.stats.seconds += dt
        return out, tau, ex, att

    def _store_geometry(self, tau, ex):
        n = self.ntheta
        phi, _ = to_boundary_coords(ex[:, 0], ex[:, 1], ex[:, 2])
        self._geom = _Geometry(
            tau.reshape(-1, n), phi.reshape(-1, n), np.mod(ex[:, 2], TWO_PI).reshape(-1, n)
        )

    # -- sphere bundle passes -------------------------------------------------
    @property
    def geometry(self) -> _Geometry:
        if self._geom is None:
            x, y, th = self._sm_states()
            _, tau, ex, _ = self._trace(x, y, th)
            self._store_geometry(tau, ex)
        return self._geom

    def _sm_pass(self, coef=_EMPTY_MODAL, m_lo=0, full=_EMPTY_FULL, atten=None):
        x, y, th = self._sm_states()
        out, tau, ex, att = self._trace(x, y, th, coef, m_lo, full, atten)
        if self._geom is None:
            self._store_geometry(tau, ex)
        return out, att

    def u_modal(self, coefs, m_lo) -> list:
        """``u^F`` for fields given by angular modes ``m_lo .. m_lo + nm - 1``.

        ``coefs`` has shape ``(nf, nm, n_nodes)``; returns ``nf`` bundle fields.
        """
        coefs = np.asarray(coefs, complex)
        out, _ = self._sm_pass(self._padded_modal(coefs), m_lo)
        n = self.ntheta
        return [BundleField(self.grid, out[:, j].reshape(-1, n), self.metric) for j in range(out.shape[1])]

    def u_f(self, f) -> BundleField:
        v = f.values if isinstance(f, ScalarField) else np.asarray(f)
        return self.u_modal(np.asarray(v)[None, None], 0)[0]

    def u_pair(self, f, alpha: OneFormField) -> BundleField:
        """``u^F`` for ``F = f + alpha_j xi^j``."""
        return self.u_modal(pair_modes(self.grid, self.metric, f, alpha)[None], -1)[0]

    def u_F(self, F: BundleField, max_modal=4) -> BundleField:
        """``u^F(x, xi) = int_0^tau F(phi_t(x, xi)) dt`` on every bundle node.

        Band-limited fields (``|k| <= max_modal``) go through the modal kernel,
        everything else through tensor interpolation in space and angle.
        """
        C = angular_fourier(F)
        k = np.rint(np.fft.fftfreq(F.ntheta) * F.ntheta).astype(int)
        energy = np.abs(C).max(axis=0)
        big = energy > 1e-13 * max(energy.max(), 1e-300)
        kmax = np.abs(k[big]).max() if big.any() else 0
        if kmax <= max_modal:
            lo = -kmax
            cols = [(m % F.ntheta) for m in range(lo, kmax + 1)]
            coefs = C[:, cols].T[None]
            return self.u_modal(coefs, lo)[0]
        out, _ = self._sm_pass(full=self._padded_full(F.values))
        return BundleField(self.grid, out[:, 0].reshape(-1, self.ntheta), self.metric)

    def exit_time_field(self) -> BundleField:
        return BundleField(self.grid, self.geometry.tau.astype(complex), self.metric)

    # -- constant-along-geodesics fields ------------------------------------
    def _inflow_interp(self, w: BoundaryField, phi, psi):
        n = self.ntheta
        tab = np.ascontiguousarray(w.inflow_table())
        u = phi.ravel() / TWO_PI * n
        v = (psi.ravel() + np.pi / 2) / TWO_PI * n
        lo, hi = 1.0, n / 2 - 1.0
        self.stats.clamped_entries += int(np.count_nonzero((v < lo) | (v > hi)))
        v = np.clip(v, lo, hi)
        out = np.zeros(u.size, complex)
        K.interp_table(tab, u, v, False, out)
        return out.reshape(phi.shape)

    def _periodic_interp(self, b: BoundaryField, phi, theta):
        n = self.ntheta
        out = np.zeros(phi.size, complex)
        K.interp_table(
            np.ascontiguousarray(b.values), phi.ravel() / TWO_PI * n, np.mod(theta.ravel(), TWO_PI) / TWO_PI * n,
            True, out,
        )
        return out.reshape(phi.shape)

    def w_psi(self, w: BoundaryField) -> BundleField:
        """Extend inflow data constantly along geodesics (read at the entry point).

        Entry directions within one angular cell of the tangent are clamped to
        that cell; the number of clamped reads is kept in ``stats``.
        """
        self._check_boundary(w)
        phi_in, psi_in, _ = self.geometry.entry()
        return BundleField(self.grid, self._inflow_interp(w, phi_in, psi_in), self.metric)

    def at_exit(self, b: BoundaryField) -> BundleField:
        """``b`` read at the exit state of each node (periodic interpolation)."""
        self._check_boundary(b)
        g = self.geometry
        return BundleField(self.grid, self._periodic_interp(b, g.exit_phi, g.exit_theta), self.metric)

    def _check_boundary(self, b):
        if b.n != self.ntheta:
            raise ValueError(f"boundary field has n={b.n}, expected {self.ntheta}")

    # -- boundary passes ----------------------------------------------------
    @property
    def boundary_geometry(self):
        """Scattering data for all boundary nodes: ``(tau, phi', theta')``.

        Inflow nodes are traced forwards to their exit; outflow nodes backwards
        to their entry, with the direction turned back to the forward sense.
        """
        if self._bgeom is None:
            x, y, th, inflow = self._boundary_states()
            _, tau, ex, _ = self._trace(x, y, th)
            inflow = inflow.ravel()
            th_out = np.where(inflow, ex[:, 2], ex[:, 2] + np.pi)
            phi_out, _ = to_boundary_coords(ex[:, 0], ex[:, 1], th_out)
            n = self.ntheta
            self._bgeom = (tau.reshape(n, n), phi_out.reshape(n, n), np.mod(th_out, TWO_PI).reshape(n, n))
        return self._bgeom

    def _boundary_pass(self, coef=_EMPTY_MODAL, m_lo=0, full=_EMPTY_FULL, atten=None):
        """Integrate along inflow rays; outflow nodes get zero."""
        x, y, th, inflow = self._boundary_states()
        sel = inflow.ravel()
        out, tau, ex, att = self._trace(x[sel], y[sel], th[sel], coef, m_lo, full, atten)
        n = self.ntheta
        res = []
        for j in range(out.shape[1]):
            v = np.zeros(n * n, complex)
            v[sel] = out[:, j]
            res.append(BoundaryField(v.reshape(n, n), self.metric.radius, self.metric))
        total = np.zeros(n * n, complex)
        total[sel] = att
        return res, BoundaryField(total.reshape(n, n), self.metric.radius, self.metric)

    def boundary_u_f(self, f) -> BoundaryField:
        """``u^f`` on all boundary nodes: the ray transform on inflow, zero on outflow."""
        v = f.values if isinstance(f, ScalarField) else np.asarray(f)
        res, _ = self._boundary_pass(self._padded_modal(np.asarray(v)[None, None]), 0)
        return res[0]

    def forward(self, F, a=None) -> BoundaryField:
        """Attenuated ray transform ``I^a F`` on inflow nodes (zero elsewhere).

        ``F`` is a :class:`ScalarField`, a pair ``(f, alpha)`` standing for
        ``f + alpha_j xi^j``, or a general :class:`BundleField`.
        """
        if isinstance(F, tuple):
            coef, lo = pair_modes(self.grid, self.metric, F[0], F[1])[None], -1
            res, _ = self._boundary_pass(self._padded_modal(coef), lo, atten=a)
        elif isinstance(F, BundleField):
            res, _ = self._boundary_pass(full=self._padded_full(F.values), atten=a)
        else:
            v = F.values if isinstance(F, ScalarField) else np.asarray(F)
            res, _ = self._boundary_pass(self._padded_modal(np.asarray(v)[None, None]), 0, atten=a)
        return res[0]

    def boundary_attenuation(self, a) -> BoundaryField:
        """``u^a`` on the boundary: total attenuation along each inflow ray."""
        _, total = self._boundary_pass(atten=a)
        return total

    def forward_weighted(self, rho: BundleField, F) -> BoundaryField:
        """``I_rho F = int rho(phi_t) F(phi_t) dt`` along inflow rays."""
        if isinstance(F, BundleField):
            Fv = F.values
        elif isinstance(F, tuple):
            Fv = pair_values(self.grid, self.metric, F[0], F[1], self.ntheta)
        else:
            v = F.values if isinstance(F, ScalarField) else np.asarray(F)
            Fv = np.repeat(np.asarray(v, complex)[:, None], self.ntheta, axis=1)
        prod = BundleField(self.grid, rho.values * Fv, self.metric)
        return self.forward(prod)

    def even_continuation(self, w: BoundaryField) -> BoundaryField:
        """``A_+ w``: ``w`` on inflow, ``w`` pulled back by scattering on outflow."""
        self._check_boundary(w)
        _, phi_s, th_s = self.boundary_geometry
        psi_s = np.mod(th_s - phi_s - np.pi + np.pi, TWO_PI) - np.pi
        inflow = w.inflow_mask
        vals = np.where(inflow, w.values, self._inflow_interp(w, phi_s, psi_s))
        return w.like(vals)

    def scattered(self, b: BoundaryField) -> BoundaryField:
        """``b`` composed with the scattering relation on every boundary node."""
        _, phi_s, th_s = self.boundary_geometry
        return b.like(self._periodic_interp(b, phi_s, th_s))

    # -- pairings -----------------------------------------------------------
    def boundary_measure(self):
        """Quadrature weights of the ``L^2_mu`` pairing on inflow nodes."""
        n = self.ntheta
        b = BoundaryField.zeros(n, self.metric.radius)
        R = self.metric.radius
        lam_R = self.metric.log_factor(R, 0.0)[0]
        w = santalo_weight(b.psi) * np.exp(lam_R) * R * (TWO_PI / n) ** 2
        return np.where(b.inflow_mask, w, 0.0)

    def boundary_pairing(self, h1: BoundaryField, h2: BoundaryField):
        return np.sum(h1.values * h2.values * self.boundary_measure())

    def bundle_measure(self):
        return np.exp(2 * self._lam[0]) * self.grid.cell_area * (TWO_PI / self.ntheta)

    def bundle_pairing(self, F, G):
        Fv = F.values if hasattr(F, "values") else F
        Gv = G.values if hasattr(G, "values") else G
        return np.sum(Fv * Gv * self.bundle_measure()[:, None])

    def pair_pairing(self, F, G):
        """``int f f' dV + int alpha . alpha' dx`` for function/1-form pairs."""
        (f, a), (f2, a2) = F, G
        g = self.grid
        fv = f.values if isinstance(f, ScalarField) else f
        f2v = f2.values if isinstance(f2, ScalarField) else f2
        s = g.integrate(fv * f2v, np.exp(2 * self._lam[0]))
        if a is not None and a2 is not None:
            s = s + g.integrate(a.alpha1 * a2.alpha1 + a.alpha2 * a2.alpha2)
        return s

    # -- adjoints -----------------------------------------------------------
    def adjoint(self, rho: Optional[BundleField], g: BoundaryField) -> Tuple[ScalarField, OneFormField]:
        """Backprojection adjoint of :meth:`forward_weighted` on degree one fields.

        ``g`` is extended constantly along geodesics, multiplied by ``rho`` and
        integrated over each fibre against ``1`` and against the covector
        ``xi_j = exp(lam) (cos, sin)``.
        """
        gpsi = self.w_psi(g).values
        if rho is not None:
            gpsi = gpsi * rho.values
        dth = TWO_PI / self.ntheta
        th = self.theta
        f = gpsi.sum(axis=1) * dth
        el = self.exp_lam
        a1 = el * (gpsi @ np.cos(th)) * dth
        a2 = el * (gpsi @ np.sin(th)) * dth
        return ScalarField(self.grid, f), OneFormField(self.grid, a1, a2)

    def attenuation_weight(self, a):
        """``rho = exp(-u^a)`` on the bundle and ``exp(u^a)`` on inflow nodes.

        With these, ``I^a F = exp(u^a|_in) I_rho F``.
        """
        ua = self.u_f(a)
        ub = self.boundary_attenuation(a)
        return ua.like(np.exp(-ua.values)), ub.like(np.exp(ub.values))

    def adjoint_attenuated(self, a, g: BoundaryField, weights=None):
        if a is None and weights is None:
            return self.adjoint(None, g)
        rho, eb = weights if weights is not None else self.attenuation_weight(a)
        return self.adjoint(rho, g * eb)

    def normal_operator(self, a, F, weights=None):
        """``N^a = (I^a)* I^a`` on a pair ``(f, alpha)``."""
        f, alpha = F
        if alpha is None:
            alpha = OneFormField.zeros(self.grid)
        data = self.forward((f, alpha), a=a)
        return self.adjoint_attenuated(a, data, weights)


# -- degree one fields ---------------------------------------------------------
def pair_modes(grid: DiscGrid, metric: MetricModel, f, alpha: OneFormField) -> np.ndarray:
    """Angular modes ``(-1, 0, 1)`` of ``f + alpha_j xi^j``; shape ``(3, n_nodes)``."""
    fv = f.values if isinstance(f, ScalarField) else np.asarray(f)
    eml = np.exp(-metric.log_factor(grid.x, grid.y)[0])
    a1 = np.asarray(alpha.alpha1, complex)
    a2 = np.asarray(alpha.alpha2, complex)
    return np.stack([0.5 * eml * (a1 + 1j * a2), np.asarray(fv, complex), 0.5 * eml * (a1 - 1j * a2)])


def pair_values(grid, metric, f, alpha, ntheta):
    th = TWO_PI * np.arange(ntheta) / ntheta
    fv = f.values if isinstance(f, ScalarField) else np.asarray(f)
    eml = np.exp(-metric.log_factor(grid.x, grid.y)[0])
    return fv[:, None] + eml[:, None] * (
        np.asarray(alpha.alpha1)[:, None] * np.cos(th) + np.asarray(alpha.alpha2)[:, None] * np.sin(th)
    )


def solenoidal_decompose(metric: MetricModel, alpha: OneFormField, tol=1e-8):
    """Split ``alpha = alpha_s + dp`` with ``p = 0`` on the boundary.

    For a conformal metric the Dirichlet problem ``Lap_g p = delta alpha`` is
    the Euclidean ``Lap p = div alpha``, solved with the Shortley-Weller
    stencil.  Returns ``(alpha_s, p, residual)`` where ``residual`` is the max
    of ``|div alpha_s|`` over nodes at least three cells inside, relative to
    ``max |div alpha|``.
    """
    g = alpha.grid
    div = alpha.codifferential()
    p = g.solve_dirichlet(div)
    dp = OneFormField.exact(g, p)
    a_s = alpha - dp
    a_s.solenoidal = True
    inner = np.hypot(g.x, g.y) < g.radius - 3 * g.dx
    r = np.abs(a_s.codifferential()[inner]).max(initial=0.0)
    scale = max(np.abs(div[inner]).max(initial=0.0), 1e-300)
    rel = r / scale if scale > 1e-300 else r
    if not np.isfinite(rel):
        raise SolverDiverged("solenoidal decomposition produced non-finite values")
    return a_s, ScalarField(g, p), float(rel)


class RaySamples:
    """Stored quadrature nodes of all inflow rays, for repeated forward maps.

    ``apply`` evaluates ``I^a(f + alpha_j xi^j)`` from padded arrays and
    ``transpose`` is its exact unconjugated transpose, so iterative solvers
    see a consistent operator pair.
    """

    def __init__(self, tr: Transport, a=None):
        self.tr = tr
        x, y, th, inflow = tr._boundary_states()
        self.sel = inflow.ravel()
        x, y, th = x[self.sel], y[self.sel], th[self.sel]
        apad, use = tr._padded_scalar(a)
        n = x.size
        offsets = np.zeros(n + 1, np.int64)
        dummy_p = np.zeros((1, 4))
        dummy_w = np.zeros(1, complex)
        K.ray_samples(x, y, th, tr.mp, tr.h, tr.tol, tr.max_steps, apad, use, offsets, dummy_p, dummy_w, True)
        self.offsets = offsets
        total = int(self.offsets[-1])
        self.pts = np.zeros((total, 4))
        self.wts = np.zeros(total, complex)
        K.ray_samples(x, y, th, tr.mp, tr.h, tr.tol, tr.max_steps, apad, use, self.offsets, self.pts, self.wts, False)
        self.n_rays = n

    def apply_padded(self, fpad, a1pad, a2pad):
        out = np.zeros(self.n_rays, complex)
        K.samples_apply_deg1(self.offsets, self.pts, self.wts, fpad, a1pad, a2pad, self.tr.mp, out)
        return out

    def transpose_padded(self, g):
        nF = self.tr.grid.n_full
        f = np.zeros((nF, nF), complex)
        a1 = np.zeros((nF, nF), complex)
        a2 = np.zeros((nF, nF), complex)
        K.samples_scatter_deg1(self.offsets, self.pts, self.wts, np.ascontiguousarray(g, complex), self.tr.mp, f, a1, a2)
        return f, a1, a2

    def to_boundary(self, vals) -> BoundaryField:
        n = self.tr.ntheta
        v = np.zeros(n * n, complex)
        v[self.sel] = vals
        return BoundaryField(v.reshape(n, n), self.tr.metric.radius, self.tr.metric)

    def from_boundary(self, b: BoundaryField):
        return b.values.ravel()[self.sel]
