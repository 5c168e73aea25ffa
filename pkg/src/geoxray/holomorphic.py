"""The operator ``W`` and odd (anti)holomorphic integrating factors.

``W f = (X_perp u^f)_0`` vanishes on constant curvature discs.  An integrating
factor for the attenuation ``a`` is an odd function ``w`` on the sphere bundle
with ``X w = -a`` whose angular modes all have one sign.  It is obtained as
``Gamma b = (Id + i H) u^b_-`` where ``b`` solves ``(Id + i W) b = a``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NeumannDiverged
from .grid import OneFormField, ScalarField
from .sphere_bundle import (
    BoundaryField,
    BundleField,
    eta_split,
    geodesic_field_derivative,
    holo_project,
    parity_split,
    signed_modes,
)
from .transport import Transport

log = logging.getLogger(__name__)


def _scalar(tr, a):
    if isinstance(a, ScalarField):
        return a
    return ScalarField(tr.grid, np.broadcast_to(np.asarray(a, complex), (tr.grid.n_nodes,)).copy())


def w_operator(tr: Transport, f, uf: BundleField = None) -> ScalarField:
    """``W f``: transport ``f``, apply ``X_perp``, average over the fibre.

    Only the modes ``+-1`` of ``u^f`` reach the mean of ``X_perp u^f``, so
    those are the only ones differentiated.
    """
    if uf is None:
        uf = tr.u_f(_scalar(tr, f))
    p, m = eta_split(uf, tr.metric)
    return ScalarField(tr.grid, -1j * (p[:, 0] - m[:, 0]))


def w_operator_many(tr: Transport, fs) -> list:
    """:func:`w_operator` for several functions sharing one transport pass."""
    vals = np.stack([_scalar(tr, f).values for f in fs])
    ufs = tr.u_modal(vals[:, None, :], 0)
    return [w_operator(tr, None, uf) for uf in ufs]


def gamma(tr: Transport, a, sign=1, ua: BundleField = None) -> BundleField:
    """``(Id + i sign H)`` applied to the odd part of ``u^a``."""
    a = _scalar(tr, a)
    if ua is None:
        ua = tr.u_f(a)
    _, odd = parity_split(ua)
    return holo_project(odd, sign)


def gamma_boundary(tr: Transport, a, sign=1) -> BoundaryField:
    """:func:`gamma` restricted to the boundary nodes of the sphere bundle."""
    ub = tr.boundary_u_f(_scalar(tr, a))
    _, odd = parity_split(ub)
    return holo_project(odd, sign)


@dataclass
class FactorReport:
    terms: int = 0
    increments: list = field(default_factory=list)
    residual_interior: float = float("nan")
    holomorphicity: float = float("nan")

    def as_dict(self):
        return {
            "neumann_terms": self.terms,
            "neumann_increments": [float(v) for v in self.increments],
            "residual_interior": float(self.residual_interior),
            "holomorphicity": float(self.holomorphicity),
        }


def solve_id_plus_iw(tr: Transport, a, sign=1, max_terms=50, tol=1e-10, report=None):
    """Neumann series for ``(Id + i sign W) b = a``.

    On constant curvature metrics ``W = 0`` and ``b = a`` without any
    transport pass.
    """
    a = _scalar(tr, a)
    report = report if report is not None else FactorReport()
    if tr.metric.is_constant_curvature:
        report.terms = 1
        return a, report
    b = a.values.astype(complex).copy()
    term = b.copy()
    scale = max(np.abs(b).max(), 1e-300)
    prev = np.inf
    for m in range(1, max_terms + 1):
        term = -1j * sign * w_operator(tr, ScalarField(tr.grid, term)).values
        inc = np.abs(term).max() / scale
        report.increments.append(inc)
        b = b + term
        report.terms = m + 1
        log.debug("neumann term %d: increment %.3e", m, inc)
        if inc <= tol:
            break
        if inc >= prev:
            raise NeumannDiverged(f"Neumann increments stopped decreasing at term {m} ({inc:.3e})")
        prev = inc
    return ScalarField(tr.grid, b), report


def interior_mask(grid, fraction=0.8):
    return np.hypot(grid.x, grid.y) <= fraction * grid.radius


def integrating_factor(tr: Transport, a, sign=1, max_terms=50, tol=1e-10, with_report=False):
    """Odd factor ``w`` with ``X w = -a``, holomorphic for ``sign=1``.

    Returns ``w`` and, if requested, a :class:`FactorReport` with the
    Neumann history, the interior max of ``|X w + a|`` and the wrong-sign
    angular energy of ``w``.
    """
    a = _scalar(tr, a)
    b, rep = solve_id_plus_iw(tr, a, sign, max_terms, tol)
    w = gamma(tr, b, sign)
    if with_report:
        r = geodesic_field_derivative(w, tr.metric).values + a.values[:, None]
        inner = interior_mask(tr.grid)
        rep.residual_interior = float(np.abs(r[inner]).max())
        rep.holomorphicity = holomorphicity_report(w, sign)
        return w, rep
    return w


def factor_on_boundary(tr: Transport, a, sign=1, max_terms=50, tol=1e-10) -> BoundaryField:
    b, _ = solve_id_plus_iw(tr, a, sign, max_terms, tol)
    return gamma_boundary(tr, b, sign)


def holomorphicity_report(u, sign=1) -> float:
    """Relative energy in wrong-signed modes, the mean excluded.

    Negative modes count as wrong for ``sign=1``, positive ones for ``sign=-1``.
    The Nyquist mode is ignored.
    """
    v = u.values if hasattr(u, "values") else np.asarray(u)
    C = np.fft.fft(v, axis=-1)
    n = v.shape[-1]
    k = signed_modes(n)
    e = np.abs(C) ** 2
    e = e.reshape(-1, n).sum(axis=0)
    wrong = (k < 0) if sign > 0 else (k > 0)
    wrong &= k != -n // 2
    nonzero = (k != 0) & (k != -n // 2)
    tot = e[nonzero].sum()
    if tot == 0:
        return 0.0
    return float(e[wrong].sum() / tot)


def s_operator(tr: Transport, h: BoundaryField) -> ScalarField:
    """``S h = (X_perp h_psi)_0`` for inflow data ``h``."""
    hp = tr.w_psi(h)
    p, m = eta_split(hp, tr.metric)
    return ScalarField(tr.grid, -1j * (p[:, 0] - m[:, 0]))


def s_adjoint_defect(tr: Transport, h: BoundaryField, f) -> float:
    """Relative defect of ``<S h, f> = <h, -(1/2pi) I (X_perp f)>_mu``."""
    f = _scalar(tr, f)
    lhs = tr.grid.integrate(s_operator(tr, h).values * f.values, np.exp(2 * tr._lam[0]))
    # X_perp f = alpha_j xi^j with alpha = (-f_y, f_x) = *df
    fx, fy = tr.grid.gradient(f.values)
    data = tr.forward((ScalarField(tr.grid, np.zeros(tr.grid.n_nodes)), OneFormField(tr.grid, -fy, fx)))
    rhs = -tr.boundary_pairing(h, data) / (2 * np.pi)
    return float(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
