"""Inversion of the unattenuated transform and the attenuated reconstruction.

Backends for ``I^0``:

* ``ExplicitCC``: holomorphic extension of the odd part of the data, valid when
  ``W = 0`` (constant curvature).
* ``FredholmW2``: the same boundary manipulations on any metric give
  ``f + W^2 f``; a Neumann series removes ``W^2``.
* ``LeastSquares``: CGLS on ``(phi, q)`` with the 1-form ``alpha = *dq``,
  recovering a function together with a solenoidal 1-form.

:func:`reconstruct_attenuated` chains integrating factors, boundary Hilbert
transforms, one pair inversion and three transport solves.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BackendMismatch, ConfigError, NeumannDiverged, SolverDiverged
from .geometry import TWO_PI
from .grid import OneFormField, ScalarField
from .holomorphic import (
    FactorReport,
    gamma,
    gamma_boundary,
    holomorphicity_report,
    interior_mask,
    solve_id_plus_iw,
    w_operator,
)
from .sphere_bundle import (
    BoundaryField,
    BundleField,
    angular_fourier,
    hilbert,
    geodesic_field_derivative,
    holo_project,
    parity_split,
)
from .transport import RaySamples, Transport

log = logging.getLogger(__name__)

BACKENDS = ("ExplicitCC", "FredholmW2", "LeastSquares")


@dataclass
class ReconstructionConfig:
    i0_backend: str = "LeastSquares"
    real_valued: bool = True
    neumann_terms: int = 50
    neumann_tol: float = 1e-8
    cgls_tol: float = 1e-5
    cgls_maxiter: int = 400
    q_scale: Optional[float] = None
    pair_backend: str = "auto"
    cgls_weighted: bool = True

    def __post_init__(self):
        if self.i0_backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.i0_backend!r}; choose from {BACKENDS}")
        if self.pair_backend not in ("auto", "explicit", "cgls"):
            raise ConfigError(f"unknown pair backend {self.pair_backend!r}")

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


# -- helpers -------------------------------------------------------------------
def _scalar(tr, a):
    if a is None:
        return ScalarField(tr.grid, np.zeros(tr.grid.n_nodes))
    if isinstance(a, ScalarField):
        return a
    return ScalarField(tr.grid, np.broadcast_to(np.asarray(a, complex), (tr.grid.n_nodes,)).copy())


def mean_of_x(tr: Transport, v1, vm1):
    """``(X v)_0`` from the modes ``v_1`` and ``v_-1`` of ``v``."""
    g = tr.grid
    lam, lx, ly = tr._lam
    dl = 0.5 * (lx - 1j * ly)
    dbl = 0.5 * (lx + 1j * ly)
    D1x, D1y = g.d_dx @ v1, g.d_dy @ v1
    Dmx, Dmy = g.d_dx @ vm1, g.d_dy @ vm1
    dbar_v1 = 0.5 * (D1x + 1j * D1y)
    d_vm1 = 0.5 * (Dmx - 1j * Dmy)
    return np.exp(-lam) * (dbar_v1 + dbl * v1 + d_vm1 + dl * vm1)


def _modes_pm1(u: BundleField):
    C = angular_fourier(u)
    return C[:, 1], C[:, -1]


# -- explicit and Fredholm backends ---------------------------------------------
def _explicit_real(tr: Transport, d: BoundaryField):
    _, d_odd = parity_split(d.restrict_inflow())
    im_boundary = d.like(holo_project(d_odd, 1).values.imag)
    im_u = tr.w_psi(im_boundary)
    c1, cm1 = _modes_pm1(im_u)
    # Re u* = -H(Im u*): mode k of H is -i sgn(k)
    r1, rm1 = 1j * c1, -1j * cm1
    return -mean_of_x(tr, r1, rm1).real


def explicit_scheme(tr: Transport, data: BoundaryField) -> ScalarField:
    """Explicit scheme without the metric check (returns ``f + W^2 f`` in general)."""
    vals = data.values
    f = _explicit_real(tr, data.like(vals.real))
    if np.any(vals.imag != 0):
        f = f + 1j * _explicit_real(tr, data.like(vals.imag))
    return ScalarField(tr.grid, f)


def invert_i0_explicit(tr: Transport, data: BoundaryField) -> ScalarField:
    """Recover ``f`` from ``I^0 f`` on a constant curvature disc.

    Raises
    ------
    BackendMismatch
        If the metric is not of constant curvature.
    """
    if not tr.metric.is_constant_curvature:
        raise BackendMismatch("ExplicitCC needs a constant curvature metric")
    return explicit_scheme(tr, data)


def invert_i0_fredholm(tr: Transport, data: BoundaryField, neumann_terms=20, tol=1e-8, history=None,
                       force_series=False):
    """Solve ``(Id + W^2) f = g`` by a Neumann series, ``g`` from the explicit scheme.

    On constant curvature ``W = 0`` and ``g`` is returned directly, unless
    ``force_series`` asks for the series with the numerical ``W``.
    """
    g = explicit_scheme(tr, data)
    if tr.metric.is_constant_curvature and not force_series:
        if history is not None:
            history.append(0.0)
        return g
    f = g.values.astype(complex).copy()
    term = f.copy()
    scale = max(np.abs(f).max(), 1e-300)
    prev = np.inf
    for m in range(neumann_terms):
        term = -w_operator(tr, w_operator(tr, term)).values
        inc = np.abs(term).max() / scale
        if history is not None:
            history.append(float(inc))
        f = f + term
        if inc <= tol:
            break
        if inc >= prev:
            raise NeumannDiverged(f"W^2 series stalled at term {m + 1} ({inc:.3e})")
        prev = inc
    if np.all(np.isreal(data.values)):
        f = f.real
    return ScalarField(tr.grid, f)


# -- explicit pair inversion ----------------------------------------------------
def circle_hilbert(Q):
    """Conjugate function on the circle: mode ``k`` times ``-i sgn(k)``."""
    n = Q.shape[-1]
    C = np.fft.fft(Q)
    k = np.fft.fftfreq(n, 1.0 / n)
    C = -1j * np.sign(k) * C
    if n % 2 == 0:
        C[n // 2] = 0
    return np.fft.ifft(C)


def _circle_eval(Q, phi):
    """Trigonometric interpolant of equispaced samples ``Q`` evaluated at ``phi``."""
    n = Q.shape[-1]
    C = np.fft.fft(Q) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        C[n // 2] = 0
    out = np.zeros(np.shape(phi), complex)
    for kk, c in zip(k, C):
        if c != 0:
            out += c * np.exp(1j * kk * phi)
    return out


def harmonic_lift(grid, Q):
    """Harmonic extension of equispaced circle samples ``Q`` to the grid nodes.

    Harmonic functions of a conformal metric are the Euclidean ones, so the
    extension is the Fourier series with ``(r/R)^|k|`` radial factors.
    """
    n = Q.shape[-1]
    C = np.fft.fft(Q) / n
    k = np.fft.fftfreq(n, 1.0 / n).astype(int)
    z = (grid.x + 1j * grid.y) / grid.radius
    out = np.zeros(grid.n_nodes, complex)
    for kk, c in zip(k, C):
        if c == 0 or (n % 2 == 0 and kk == -n // 2):
            continue
        out += c * (z ** kk if kk >= 0 else np.conj(z) ** (-kk))
    return out


def explicit_pair_scheme(tr: Transport, data: BoundaryField, q_boundary=None):
    """``(phi, q)`` from ``I^0(phi + (*dq)_j xi^j)`` without iteration.

    ``q`` is split into a part vanishing on the boundary and the harmonic
    extension of ``q_boundary`` (zero when not given).  For the harmonic part
    ``*dq_h = dp`` with ``p`` the conjugate harmonic function, whose data is
    ``p(exit) - p(start)`` and is subtracted first.

    The fibre-odd part of the remaining zero-extended data sees only ``phi``
    and goes through :func:`explicit_scheme`.  The even part ``d_+`` is the
    trace of the even part ``u_+`` of the transport solution, and since
    ``(u_+)_0 = W^* q_0 = 0`` the field ``H u_+ - q_0`` is constant along
    geodesics.  With ``q_0 = 0`` on the circle, ``q_0`` is minus the fibre mean
    of ``H d_+`` read at the exit points.
    """
    n = tr.ntheta
    d = data.restrict_inflow()
    q_h = np.zeros(tr.grid.n_nodes)
    if q_boundary is not None and np.any(q_boundary != 0):
        Q = np.asarray(q_boundary, complex)
        P = circle_hilbert(Q)
        _, phi_s, _ = tr.boundary_geometry
        jump = _circle_eval(P, phi_s) - P[:, None]
        d = (d - jump).restrict_inflow()
        q_h = harmonic_lift(tr.grid, Q)
        if np.isrealobj(q_boundary):
            q_h = q_h.real
    phi = explicit_scheme(tr, d)
    d_even, _ = parity_split(d)
    q0 = -tr.at_exit(hilbert(d_even)).values.mean(axis=1)
    q = q0 + q_h
    if not np.iscomplexobj(data.values) or np.all(np.imag(data.values) == 0):
        if not np.iscomplexobj(q_h):
            q = q.real
    return phi, ScalarField(tr.grid, q)



# -- least squares for function + solenoidal 1-form ----------------------------------
class PairOperator:
    """``(phi, q) -> I^0(phi + (*dq)_j xi^j)`` on inflow nodes, with exact transpose.

    ``q`` is scaled by ``q_scale`` so both blocks have comparable column norms.
    With ``with_q=False`` the unknown is the function alone.
    """

    def __init__(self, tr: Transport, q_scale=None, a=None, with_q=True, samples=None):
        self.tr = tr
        self.with_q = with_q
        self.samples = samples if samples is not None else RaySamples(tr, a)
        g = tr.grid
        self.N = g.n_nodes
        self.E = g.extension
        self.ET = self.E.T.tocsr()
        self.Dx = g.d_dx
        self.Dy = g.d_dy
        self.DxT = self.Dx.T.tocsr()
        self.DyT = self.Dy.T.tocsr()
        self.q_scale = 1.0 if q_scale is None else q_scale
        nF = g.n_full
        self._shape = (nF, nF)

    def _pad(self, v):
        return np.ascontiguousarray((self.E @ v).reshape(self._shape))

    @property
    def size(self):
        return 2 * self.N if self.with_q else self.N

    def apply(self, x):
        if not self.with_q:
            z = np.zeros(self._shape)
            return self.samples.apply_padded(self._pad(x), z, z)
        phi, q = x[: self.N], x[self.N:] * self.q_scale
        a1 = -(self.Dy @ q)
        a2 = self.Dx @ q
        return self.samples.apply_padded(self._pad(phi), self._pad(a1), self._pad(a2))

    def transpose(self, r):
        f, a1, a2 = self.samples.transpose_padded(r)
        f = self.ET @ f.ravel()
        if not self.with_q:
            return f
        a1 = self.ET @ a1.ravel()
        a2 = self.ET @ a2.ravel()
        q = -(self.DyT @ a1) + self.DxT @ a2
        return np.concatenate([f, q * self.q_scale])

    def adjoint(self, r):
        return np.conj(self.transpose(np.conj(r)))

    def split(self, x):
        phi = x[: self.N]
        q = x[self.N:] * self.q_scale
        return ScalarField(self.tr.grid, phi), ScalarField(self.tr.grid, q)


@dataclass
class CGLSResult:
    x: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False


def cgls(op, b, weights=None, tol=1e-5, maxiter=400, x0=None):
    """Conjugate gradient on the weighted normal equations.

    Minimises ``|| W^(1/2) (A x - b) ||`` where ``W`` is diagonal.  Stops when
    ``||A^H W r|| <= tol ||A^H W b||``.
    """
    w = np.ones_like(b, dtype=float) if weights is None else weights
    x = np.zeros(op.size, complex) if x0 is None else x0.astype(complex)
    r = b - op.apply(x) if x0 is not None else b.astype(complex).copy()
    s = op.adjoint(w * r)
    p = s.copy()
    gamma0 = np.vdot(s, s).real
    norm0 = np.sqrt(gamma0)
    gam = gamma0
    hist = [1.0]
    if norm0 == 0:
        return CGLSResult(x, 0, hist, True)
    it = 0
    for it in range(1, maxiter + 1):
        q = op.apply(p)
        denom = np.vdot(q, w * q).real
        if denom <= 0 or not np.isfinite(denom):
            raise SolverDiverged("CGLS breakdown")
        alpha = gam / denom
        x += alpha * p
        r -= alpha * q
        s = op.adjoint(w * r)
        gnew = np.vdot(s, s).real
        rel = np.sqrt(gnew) / norm0
        hist.append(float(rel))
        if not np.isfinite(rel):
            raise SolverDiverged("CGLS produced non-finite values")
        if rel <= tol:
            return CGLSResult(x, it, hist, True)
        p = s + (gnew / gam) * p
        gam = gnew
    return CGLSResult(x, it, hist, False)


def invert_i0_pairs(
    tr: Transport, data: BoundaryField, config: ReconstructionConfig = None, op=None, q_boundary=None
):
    """Recover ``(phi, alpha)`` with solenoidal ``alpha = *dq`` from ``I^0`` data.

    ``q_boundary`` holds ``q`` at the equispaced boundary points (zero when
    omitted).  Not every solenoidal form has a stream function constant on
    the circle, so the trace is an input rather than a gauge.

    With ``pair_backend="explicit"`` (the ``"auto"`` choice on constant
    curvature) the closed-form scheme is used.  Otherwise CGLS on ``(phi, q)``
    starts from that scheme's output and refines it against the stored rays.

    Returns ``(phi, alpha, info)``.
    """
    config = config or ReconstructionConfig()
    backend = config.pair_backend
    if backend == "auto":
        backend = "explicit" if tr.metric.is_constant_curvature else "cgls"
    if backend == "explicit" and not tr.metric.is_constant_curvature:
        raise BackendMismatch("explicit pair inversion needs a constant curvature metric")
    phi, q = explicit_pair_scheme(tr, data, q_boundary)
    info = {"backend": backend, "iterations": 0, "converged": True, "final_relative_gradient": 0.0}
    if backend == "cgls":
        if op is None:
            op = PairOperator(tr, config.q_scale)
        b = op.samples.from_boundary(data)
        weights = op.samples.from_boundary(BoundaryField(tr.boundary_measure(), tr.metric.radius))
        weights = weights / weights.max()
        x0 = np.concatenate([phi.values, q.values / op.q_scale]).astype(complex)
        res = cgls(op, b, weights, config.cgls_tol, config.cgls_maxiter, x0=x0)
        phi, q = op.split(res.x)
        if np.isrealobj(data.values):
            phi, q = ScalarField(tr.grid, phi.values.real), ScalarField(tr.grid, q.values.real)
        info.update(iterations=res.iterations, converged=res.converged,
                    final_relative_gradient=res.residual_history[-1])
    alpha = OneFormField.star_exact(tr.grid, q.values)
    info["q"] = q
    return phi, alpha, info


def invert_i0(tr: Transport, data: BoundaryField, config: ReconstructionConfig = None) -> ScalarField:
    """Function inversion of ``I^0`` with the configured backend."""
    config = config or ReconstructionConfig()
    if config.i0_backend == "ExplicitCC":
        return invert_i0_explicit(tr, data)
    if config.i0_backend == "FredholmW2":
        return invert_i0_fredholm(tr, data, config.neumann_terms, config.neumann_tol)
    return invert_i0_lsq(tr, data, config)[0]


def invert_i0_lsq(tr: Transport, data: BoundaryField, config: ReconstructionConfig = None, op=None):
    """Function-only CGLS inversion of ``I^0``, started from zero.

    Independent of the explicit scheme, so the two can be compared.
    Returns ``(f, CGLSResult)``.
    """
    config = config or ReconstructionConfig()
    if op is None:
        op = PairOperator(tr, with_q=False)
    b = op.samples.from_boundary(data)
    weights = op.samples.from_boundary(BoundaryField(tr.boundary_measure(), tr.metric.radius))
    w = (weights / weights.max()) if config.cgls_weighted else None
    res = cgls(op, b, w, config.cgls_tol, config.cgls_maxiter)
    f = res.x.real if np.isrealobj(data.values) else res.x
    return ScalarField(tr.grid, f), res


# -- attenuated reconstruction ------------------------------------------------------
@dataclass
class Diagnostics:
    backend: str = ""
    timings: dict = field(default_factory=dict)
    holomorphicity: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "backend": self.backend,
            "per_step_residuals": self.residuals,
            "holomorphicity_reports": self.holomorphicity,
            "iterations": self.iterations,
            "timings": self.timings,
        }


def _boundary_factor(tr, a, sign, config, diag, key):
    """Integrating factor on the bundle and on the boundary."""
    rep = FactorReport()
    b, rep = solve_id_plus_iw(tr, a, sign, config.neumann_terms, config.neumann_tol, rep)
    w = gamma(tr, b, sign)
    wb = gamma_boundary(tr, b, sign)
    diag.iterations[f"neumann_{key}"] = rep.terms
    diag.holomorphicity[key] = holomorphicity_report(w, sign)
    inner = interior_mask(tr.grid)
    r = geodesic_field_derivative(w, tr.metric).values + a.values[:, None]
    diag.residuals[f"factor_{key}_interior"] = float(np.abs(r[inner]).max())
    return w, wb


def _v_field(tr, beta, q_boundary, op, config, diag, key):
    """Step 4: ``v = beta o psi + u^((I^0)^-1 (A_-^* beta))``."""
    h = (beta - tr.scattered(beta)).restrict_inflow()
    phi, alpha, info = invert_i0_pairs(tr, h, config, op, q_boundary)
    diag.iterations[f"pairs_{key}"] = info["iterations"]
    fit = tr.forward((phi, alpha)) - h
    hn = np.linalg.norm(h.values)
    diag.residuals[f"pair_fit_{key}"] = float(np.linalg.norm(fit.values) / hn) if hn else 0.0
    return tr.at_exit(beta) + tr.u_pair(phi, alpha)


def reconstruct_attenuated(
    tr: Transport, a, sinogram: BoundaryField, config: ReconstructionConfig = None, op: PairOperator = None
):
    """Reconstruct ``f`` from ``I^a f``.

    Returns ``(f, diagnostics)``.  ``op`` may be passed to reuse stored ray
    samples between calls on the same transport object.
    """
    config = config or ReconstructionConfig()
    diag = Diagnostics(backend=config.i0_backend)
    t0 = time.perf_counter()
    a = _scalar(tr, a)
    tr._check_boundary(sinogram)
    if config.i0_backend == "ExplicitCC":
        if not tr.metric.is_constant_curvature:
            raise BackendMismatch("ExplicitCC needs a constant curvature metric")
        if config.pair_backend == "cgls":
            raise ConfigError("ExplicitCC cannot be combined with pair_backend='cgls'")

    # Step 1: data on the whole boundary, zero off inflow
    d = sinogram.restrict_inflow()

    if np.all(a.values == 0) and config.i0_backend in ("ExplicitCC", "FredholmW2"):
        f = invert_i0(tr, d, config)
        diag.timings["total"] = time.perf_counter() - t0
        return f, diag

    # Step 2: integrating factors
    t = time.perf_counter()
    w, wb = _boundary_factor(tr, a, 1, config, diag, "w")
    if not config.real_valued:
        wt, wtb = _boundary_factor(tr, a, -1, config, diag, "w_tilde")
    diag.timings["factors"] = time.perf_counter() - t

    # Step 3: boundary Hilbert projections
    beta = holo_project(d * np.exp(-wb.values), -1)
    if not config.real_valued:
        beta_t = holo_project(d * np.exp(-wtb.values), 1)

    # Step 4: solution of the conjugated transport problem
    t = time.perf_counter()
    # trace of the stream function: q = -i (e^-w u)_0, and +i with w~
    v = _v_field(tr, beta, -1j * (np.exp(-wb.values) * d.values).mean(axis=1), op, config, diag, "v")
    if not config.real_valued:
        qt = 1j * (np.exp(-wtb.values) * d.values).mean(axis=1)
        vt = _v_field(tr, beta_t, qt, op, config, diag, "v_tilde")
    diag.timings["pair_inversion_and_transport"] = time.perf_counter() - t

    # Step 5: the part of u with zero mean
    t = time.perf_counter()
    if config.real_valued:
        m_hat = 0.5 * holo_project(v * np.exp(w.values), -1).values.real
        m_hat_b = 0.5 * holo_project(beta * np.exp(wb.values), -1).values.real
    else:
        m_hat = 0.25 * holo_project(v * np.exp(w.values), -1).values + 0.25 * holo_project(
            vt * np.exp(wt.values), 1).values
        m_hat_b = 0.25 * holo_project(beta * np.exp(wb.values), -1).values + 0.25 * holo_project(
            beta_t * np.exp(wtb.values), 1).values
    u_hat = BundleField(tr.grid, m_hat - m_hat.mean(axis=1, keepdims=True), tr.metric)
    u_hat_b = d.like(m_hat_b - m_hat_b.mean(axis=1, keepdims=True))

    # Step 6: the mean q
    h_phi = (d.values - u_hat_b.values).mean(axis=1)
    h_tab = d.like(np.repeat(h_phi[:, None], tr.ntheta, axis=1))
    h_exit = tr.at_exit(h_tab).values
    Xu = geodesic_field_derivative(u_hat, tr.metric)
    G = Xu.values + a.values[:, None] * u_hat.values
    _, G_odd = parity_split(G)
    C = angular_fourier(G_odd)
    uG = tr.u_modal(np.stack([C[:, -1], np.zeros(tr.grid.n_nodes), C[:, 1]])[None], -1)[0]
    q_field = h_exit + uG.values
    q = q_field.mean(axis=1)
    spread = np.abs(q_field - q[:, None]).std(axis=1)
    inner = interior_mask(tr.grid)
    scale = max(np.abs(q[inner]).max(), 1e-300)
    diag.residuals["q_angular_spread_interior"] = float(spread[inner].max() / scale)
    diag.residuals["odd_G_out_of_band"] = float(
        np.sqrt(np.sum(np.abs(C) ** 2) - np.sum(np.abs(C[:, [1, -1]]) ** 2)) / max(np.sqrt(np.sum(np.abs(C) ** 2)), 1e-300)
    )
    diag.residuals["u_hat_mean"] = float(np.abs(u_hat.values.mean(axis=1)).max())
    diag.timings["q"] = time.perf_counter() - t

    # Step 7
    f = -Xu.values.mean(axis=1) - a.values * q
    if config.real_valued:
        f = f.real
    diag.timings["total"] = time.perf_counter() - t0
    return ScalarField(tr.grid, f), diag


# -- holomorphicity of transported solutions ------------------------------------------
def verify_holomorphic_solution(tr: Transport, a, p, sign=1):
    """Transport a holomorphic right-hand side and measure the result.

    The right-hand side is built from a function ``p`` vanishing on the
    boundary and the odd factor ``w`` of ``a``: ``F = -X(p w)``.  ``F`` has
    only non-negative modes and ``p w`` solves the transport problem with zero
    boundary values, so ``v = u^F`` must be holomorphic with ``v_0 = 0``.

    Returns a dict with the wrong-frequency energy of the numerical ``v``,
    its relative mean and its relative distance to ``p w``.
    """
    from .holomorphic import integrating_factor

    a = _scalar(tr, a)
    pv = p.values if isinstance(p, ScalarField) else np.asarray(p)
    w = integrating_factor(tr, a, sign)
    pw = w * pv[:, None]
    F = -geodesic_field_derivative(pw, tr.metric)
    v = tr.u_F(F)
    nv = np.abs(v.values).max()
    return {
        "wrong_frequency_energy": holomorphicity_report(v, sign),
        "rhs_wrong_frequency_energy": holomorphicity_report(F, sign),
        "mean_ratio": float(np.abs(v.values.mean(axis=1)).max() / nv) if nv else 0.0,
        "distance_to_exact": float(np.abs(v.values - pw.values).max() / max(np.abs(pw.values).max(), 1e-300)),
    }
