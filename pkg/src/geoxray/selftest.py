"""Invariant suite run by ``geoxray selftest``.

Every check returns the measured number and its threshold.  The suite runs
in a fixed order and stops at nothing: all checks are attempted and the
report is always complete.  ``level="quick"`` uses coarse grids, ``"full"``
the refinement sweeps.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import sphere_bundle as sb
from .geometry import BundlePoint, MetricModel, exit_time, scattering
from .grid import DiscGrid, OneFormField, ScalarField
from .holomorphic import integrating_factor, interior_mask, w_operator
from .phantoms import gauge_pair, gaussian, gauge_profile
from .sphere_bundle import BoundaryField, BundleField
from .transport import Transport

log = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    seconds: float = 0.0
    detail: str = ""


def _rng(seed=0):
    return np.random.default_rng(seed)


# -- fibrewise algebra ----------------------------------------------------------
def hilbert_spectral_error(n=64, kmax=None):
    th = 2 * np.pi * np.arange(n) / n
    kmax = n // 2 - 1 if kmax is None else kmax
    err = 0.0
    for k in range(-kmax, kmax + 1):
        e = np.exp(1j * k * th)
        expect = -1j * np.sign(k) * e
        err = max(err, np.abs(sb.hilbert(e) - expect).max())
    return float(err)


def hilbert_square_error(n=64, seed=0):
    """``H^2 u = -u + u_0`` on a random field without Nyquist content."""
    r = _rng(seed)
    C = r.standard_normal((5, n)) + 1j * r.standard_normal((5, n))
    C[:, n // 2] = 0
    u = np.fft.ifft(C, axis=-1)
    lhs = sb.hilbert(sb.hilbert(u))
    rhs = -u + u.mean(axis=-1, keepdims=True)
    return float(np.abs(lhs - rhs).max() / np.abs(u).max())


def fft_roundtrip_error(n=64, seed=1):
    r = _rng(seed)
    v = r.standard_normal((7, n)) + 1j * r.standard_normal((7, n))
    g = DiscGrid(8)
    u = BundleField(g, np.resize(v, (g.n_nodes, n)))
    back = sb.inverse_angular_fourier(sb.angular_fourier(u))
    return float(np.abs(back - u.values).max() / np.abs(u.values).max())


# -- commutator ----------------------------------------------------------------
def commutator_test_field(grid, ntheta, metric):
    """Smooth field with angular modes ``-2..2``."""
    x, y = grid.x[:, None], grid.y[:, None]
    th = 2 * np.pi * np.arange(ntheta) / ntheta
    vals = (
        np.exp(-(x - 0.1) ** 2 - 2 * y ** 2)
        + (x * y + 0.5 * x) * np.cos(th)
        + np.sin(2 * x + y) * np.sin(th)
        + (0.3 + x * x) * np.cos(2 * th)
        + y * np.sin(2 * th)
    )
    return BundleField(grid, vals, metric)


def commutator_residual(metric, n_x, ntheta, n_points=12, seed=3):
    """Max over interior samples of ``|[H, X]u - X_perp u_0 - (X_perp u)_0|``.

    Derivatives are pointwise: ``X`` by differences along the geodesic flow,
    ``X_perp`` by spatial differences plus the spectral angular term.
    """
    grid = DiscGrid(n_x, metric.radius)
    u = commutator_test_field(grid, ntheta, metric)
    r = _rng(seed)
    rad = 0.5 * metric.radius * np.sqrt(r.uniform(size=n_points))
    ang = r.uniform(0, 2 * np.pi, n_points)
    px, py = rad * np.cos(ang), rad * np.sin(ang)
    th = 2 * np.pi * np.arange(ntheta) / ntheta
    X = np.repeat(px, ntheta)
    Y = np.repeat(py, ntheta)
    T = np.tile(th, n_points)
    delta = grid.dx
    Xu = sb.geodesic_derivative(u, X, Y, T, delta=delta, metric=metric).reshape(n_points, ntheta)
    Hu = sb.hilbert(u)
    XHu = sb.geodesic_derivative(Hu, X, Y, T, delta=delta, metric=metric).reshape(n_points, ntheta)
    lhs = sb.hilbert(Xu) - XHu
    u0 = BundleField(grid, np.repeat(u.values.mean(axis=1, keepdims=True), ntheta, axis=1), metric)
    perp_u0 = sb.perp_derivative(u0, X, Y, T, delta=delta, metric=metric).reshape(n_points, ntheta)
    perp_u = sb.perp_derivative(u, X, Y, T, delta=delta, metric=metric).reshape(n_points, ntheta)
    rhs = perp_u0 + perp_u.mean(axis=1, keepdims=True)
    return float(np.abs(lhs - rhs).max())


def commutator_orders(metric, sizes=((16, 16), (32, 32), (64, 64))):
    res = [commutator_residual(metric, nx, nt) for nx, nt in sizes]
    orders = [float(np.log2(res[i] / res[i + 1])) for i in range(len(res) - 1)]
    return res, orders


# -- geodesics ------------------------------------------------------------------
def chord_error(n=16, radius=1.0):
    """Euclidean exit times against ``2 R cos psi``."""
    m = MetricModel.euclidean(radius)
    err = 0.0
    for phi in np.linspace(0, 2 * np.pi, n, endpoint=False):
        for psi in np.linspace(-1.4, 1.4, 7):
            x, y = radius * np.cos(phi), radius * np.sin(phi)
            t = exit_time(m, BundlePoint(x, y, phi + np.pi + psi))
            err = max(err, abs(t - 2 * radius * np.cos(psi)))
    return float(err)


def scattering_involution_error(metric, n=12):
    phi = np.repeat(np.linspace(0, 2 * np.pi, n, endpoint=False), 5)
    psi = np.tile(np.linspace(-1.3, 1.3, 5), n)
    p1, s1 = scattering(metric, phi, psi)
    p2, s2 = scattering(metric, p1, s1)
    dphi = np.angle(np.exp(1j * (p2 - phi)))
    return float(max(np.abs(dphi).max(), np.abs(s2 - psi).max()))


# -- transforms -------------------------------------------------------------------
def _random_pair(grid, seed):
    r = _rng(seed)
    f = np.zeros(grid.n_nodes)
    a1 = np.zeros(grid.n_nodes)
    a2 = np.zeros(grid.n_nodes)
    for _ in range(3):
        c = r.uniform(-0.4, 0.4, 2)
        s = r.uniform(0.12, 0.25)
        f += r.standard_normal() * gaussian(grid.x, grid.y, c, s, support=0.85 * grid.radius)
        a1 += r.standard_normal() * gaussian(grid.x, grid.y, c[::-1], s, support=0.85 * grid.radius)
        a2 += r.standard_normal() * gaussian(grid.x, grid.y, -c, s, support=0.85 * grid.radius)
    return ScalarField(grid, f), OneFormField(grid, a1, a2)


def _random_boundary(n, radius, seed):
    r = _rng(seed)
    c = r.standard_normal((3, 3))

    def fn(phi, psi):
        out = np.zeros(np.broadcast(phi, psi).shape)
        for i in range(3):
            for j in range(3):
                out = out + c[i, j] * np.cos(i * phi + 0.3 * j) * np.cos(j * psi)
        return out

    return BoundaryField.from_function(n, fn, radius)


def adjoint_defects(tr: Transport, n_pairs=10, a=None, seed=0):
    """Relative defects of ``<I^a F, g>_mu = (F, (I^a)^* g)`` for random pairs."""
    out = []
    for i in range(n_pairs):
        F = _random_pair(tr.grid, seed + i)
        g = _random_boundary(tr.ntheta, tr.metric.radius, 100 + seed + i)
        lhs = tr.boundary_pairing(tr.forward(F, a), g)
        G = tr.adjoint_attenuated(a, g) if a is not None else tr.adjoint(None, g)
        rhs = tr.pair_pairing(F, G)
        out.append(float(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)))
    return out


def phantom_set(grid):
    R = grid.radius
    return [
        ScalarField(grid, gaussian(grid.x, grid.y, (0.2 * R, 0.1 * R), 0.15 * R, support=0.8 * R)),
        ScalarField(grid, gaussian(grid.x, grid.y, (-0.3 * R, 0.2 * R), 0.2 * R, support=0.8 * R)),
        ScalarField(grid, gaussian(grid.x, grid.y, (0.0, -0.25 * R), 0.1 * R, support=0.8 * R)
                    - 0.5 * gaussian(grid.x, grid.y, (0.1 * R, 0.3 * R), 0.12 * R, support=0.8 * R)),
    ]


def w_ratio(tr: Transport, f):
    return float(np.abs(w_operator(tr, f).values).max() / np.abs(f.values).max())


def factor_residual(tr: Transport, a, sign=1):
    w, rep = integrating_factor(tr, a, sign, with_report=True)
    return rep.residual_interior, rep.holomorphicity


def gauge_ratio(tr: Transport, a):
    """``|I^a(a p + dp)|_inf / |I^a p|_inf`` with ``p = (1 - |x|^2)^2``."""
    ap, dp = gauge_pair(tr.grid, a)
    p = ScalarField(tr.grid, gauge_profile(tr.grid.x, tr.grid.y, tr.grid.radius))
    num = np.abs(tr.forward((ap, dp), a).values).max()
    den = np.abs(tr.forward(p, a).values).max()
    return float(num / den)


def gaussian_attenuation(grid, amp=0.5):
    R = grid.radius
    return ScalarField(grid, amp * gaussian(grid.x, grid.y, (0.1 * R, -0.1 * R), 0.35 * R, support=0))


# -- suite -------------------------------------------------------------------------
def _levels(level):
    if level == "quick":
        return dict(n_x=32, ntheta=64, comm=((16, 16), (32, 32)), w_tol=3e-2, fac_tol=1e-2, gauge_tol=1e-2,
                    adj_tol=2e-2, holo_tol=1e-4, agree_tol=0.05, lsq_iter=60, adj_pairs=3)
    if level == "full":
        return dict(n_x=64, ntheta=128, comm=((16, 16), (32, 32), (64, 64)), w_tol=1e-3, fac_tol=1e-3,
                    gauge_tol=1e-3, adj_tol=1e-3, holo_tol=1e-4, agree_tol=0.03, lsq_iter=150, adj_pairs=10)
    raise ValueError(f"unknown level {level!r}")


def run_suite(level="quick"):
    """Run every check; returns a list of :class:`Check`."""
    from .inversion import invert_i0_explicit, invert_i0_fredholm, invert_i0_lsq, verify_holomorphic_solution
    from .inversion import ReconstructionConfig

    P = _levels(level)
    checks = []

    def record(name, fn, threshold, cmp=lambda v, t: v <= t):
        t0 = time.perf_counter()
        try:
            v = fn()
            detail = ""
            if isinstance(v, tuple):
                v, detail = v
            ok = bool(cmp(v, threshold))
        except Exception as exc:  # a crashing check is a failing check
            v, ok, detail = float("nan"), False, f"{type(exc).__name__}: {exc}"
        checks.append(Check(name, float(v), float(threshold), ok, time.perf_counter() - t0, detail))
        log.info("%-28s %-4s %.3e (threshold %.1e)", name, "ok" if ok else "FAIL", v, threshold)

    record("hilbert_spectral", hilbert_spectral_error, 1e-12)
    record("hilbert_square", hilbert_square_error, 1e-12)
    record("fft_roundtrip", fft_roundtrip_error, 1e-12)

    cc = MetricModel.constant_curvature(-0.5)

    def comm():
        res, orders = commutator_orders(cc, P["comm"])
        return min(orders), f"residuals {res}"

    record("commutator_order", comm, 1.8, cmp=lambda v, t: v >= t)
    record("euclidean_chords", chord_error, 1e-8)
    record("scattering_involution", lambda: scattering_involution_error(MetricModel.constant_curvature(0.5)), 1e-7)

    g = DiscGrid(P["n_x"])
    tr_e = Transport(MetricModel.euclidean(), g, P["ntheta"])
    tr_c = Transport(MetricModel.constant_curvature(0.5), g, P["ntheta"])
    a = gaussian_attenuation(g)

    record("adjoint_identity", lambda: max(adjoint_defects(tr_c, P["adj_pairs"], a)), P["adj_tol"])
    record("w_vanishing", lambda: max(w_ratio(tr_c, f) for f in phantom_set(g)), P["w_tol"])

    def fac():
        worst = 0.0
        holo = 0.0
        for tr in (tr_e, tr_c):
            r, h = factor_residual(tr, a)
            worst, holo = max(worst, r), max(holo, h)
        return worst, f"wrong-frequency energy {holo:.2e}"

    record("integrating_factor", fac, P["fac_tol"])
    record("gauge_kernel", lambda: gauge_ratio(tr_e, a), P["gauge_tol"])

    def holo():
        p = ScalarField(g, gauge_profile(g.x, g.y) * np.exp(-g.x ** 2))
        rep = verify_holomorphic_solution(tr_c, a, p)
        return rep["wrong_frequency_energy"], f"distance to exact {rep['distance_to_exact']:.2e}"

    record("holomorphic_solution", holo, P["holo_tol"])

    def agree():
        f = phantom_set(g)[0]
        d = tr_c.forward(f)
        fe = invert_i0_explicit(tr_c, d).values
        fl = invert_i0_lsq(tr_c, d, ReconstructionConfig(cgls_maxiter=P["lsq_iter"], cgls_tol=1e-8))[0].values
        ff = invert_i0_fredholm(tr_c, d).values
        e1 = np.linalg.norm(fe - fl) / np.linalg.norm(fe)
        e2 = np.linalg.norm(fe - ff) / np.linalg.norm(fe)
        return max(e1, e2), f"explicit-lsq {e1:.3e}, explicit-fredholm {e2:.3e}"

    record("backend_agreement", agree, P["agree_tol"])
    return checks


def report(checks, level):
    return {
        "level": level,
        "passed": all(c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }
