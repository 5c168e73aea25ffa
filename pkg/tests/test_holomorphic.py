import numpy as np
import pytest

from geoxray import BoundaryField, DiscGrid, MetricModel, ScalarField, Transport
from geoxray.holomorphic import (
    holomorphicity_report,
    integrating_factor,
    s_adjoint_defect,
    solve_id_plus_iw,
    w_operator,
    w_operator_many,
)
from geoxray.selftest import gaussian_attenuation, phantom_set

TH = 2 * np.pi * np.arange(32) / 32


def test_holomorphicity_report_pure_modes():
    assert abs(holomorphicity_report(np.exp(-1j * TH)) - 1.0) < 1e-15
    assert holomorphicity_report(np.exp(2j * TH)) < 1e-28
    assert abs(holomorphicity_report(np.exp(2j * TH), sign=-1) - 1.0) < 1e-15
    assert holomorphicity_report(np.ones(32)) == 0.0
    assert abs(holomorphicity_report(np.cos(TH)) - 0.5) < 1e-15


def test_w_small_on_constant_curvature(tr_cc32):
    fs = phantom_set(tr_cc32.grid)
    for f, W in zip(fs, w_operator_many(tr_cc32, fs)):
        assert np.abs(W.values).max() / np.abs(f.values).max() < 3e-2
    single = w_operator(tr_cc32, fs[0])
    assert np.allclose(single.values, w_operator_many(tr_cc32, fs[:1])[0].values)


def test_w_grows_with_perturbation(grid32):
    f = phantom_set(grid32)[1]
    r = []
    for eps in (0.0, 0.05, 0.15):
        tr = Transport(MetricModel.perturbed(0.0, eps, center=(0.2, 0.0), width=0.3), grid32, 64)
        r.append(np.abs(w_operator(tr, f).values).max())
    assert r[0] < r[1] < r[2]


def test_neumann_series_decreases(grid32):
    tr = Transport(MetricModel.perturbed(0.0, 0.1), grid32, 64)
    b, rep = solve_id_plus_iw(tr, gaussian_attenuation(grid32), tol=1e-8)
    inc = rep.increments
    assert len(inc) >= 2 and all(x > y for x, y in zip(inc, inc[1:]))
    assert inc[-1] <= 1e-8


def test_neumann_skipped_on_constant_curvature(tr_cc32):
    a = gaussian_attenuation(tr_cc32.grid)
    b, rep = solve_id_plus_iw(tr_cc32, a)
    assert rep.terms == 1 and b is a


@pytest.mark.parametrize("sign", [1, -1])
def test_integrating_factor(tr_euc32, sign):
    a = gaussian_attenuation(tr_euc32.grid)
    w, rep = integrating_factor(tr_euc32, a, sign, with_report=True)
    assert rep.residual_interior < 1e-2
    assert rep.holomorphicity < 1e-20
    # odd in the fibre
    n = w.ntheta
    assert np.abs(w.values + np.roll(w.values, n // 2, axis=1)).max() < 1e-12


def test_integrating_factor_zero_attenuation(tr_euc32):
    w = integrating_factor(tr_euc32, 0.0)
    assert np.abs(w.values).max() == 0.0


def test_s_adjoint(tr_cc32):
    h = BoundaryField.from_function(64, lambda phi, psi: np.cos(phi) * np.cos(psi) ** 2 + 0.3 * np.sin(2 * phi) * np.sin(psi))
    assert s_adjoint_defect(tr_cc32, h, phantom_set(tr_cc32.grid)[0]) < 1e-2
