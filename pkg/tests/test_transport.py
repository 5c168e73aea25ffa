import numpy as np
import pytest

from geoxray import BoundaryField, BundleField, DiscGrid, MetricModel, OneFormField, ScalarField, Transport
from geoxray.phantoms import gauge_pair, gauge_profile, gaussian
from geoxray.selftest import adjoint_defects, gaussian_attenuation
from geoxray.transport import solenoidal_decompose


def test_radial_gaussian_matches_quadrature(tr_euc32):
    # line integral of exp(-r^2 / 2 s^2) over a chord at distance d: s sqrt(2 pi) exp(-d^2 / 2 s^2)
    s = 0.15
    f = ScalarField.from_function(tr_euc32.grid, lambda x, y: np.exp(-(x * x + y * y) / (2 * s * s)))
    b = tr_euc32.forward(f)
    exact = s * np.sqrt(2 * np.pi) * np.exp(-np.sin(b.psi) ** 2 / (2 * s * s))
    mask = b.inflow_mask
    assert np.abs(b.values - exact)[mask].max() < 2e-3
    assert np.abs(b.values[~mask]).max() == 0.0


def test_attenuated_constant(tr_euc32):
    g = tr_euc32.grid
    c = 0.5
    one = ScalarField(g, np.ones(g.n_nodes))
    b = tr_euc32.forward(one, ScalarField(g, c * one.values))
    L = 2 * np.cos(b.psi)
    exact = (np.exp(c * L) - 1) / c
    assert np.abs(b.values - exact)[b.inflow_mask].max() < 1e-7


def test_backprojection_of_one(tr_euc32):
    b = BoundaryField(np.ones((64, 64)), 1.0, tr_euc32.metric)
    f, alpha = tr_euc32.adjoint(None, b)
    assert np.allclose(f.values, 2 * np.pi)
    assert np.abs(alpha.alpha1).max() < 1e-12 and np.abs(alpha.alpha2).max() < 1e-12


def test_exit_time_field_at_centre(tr_euc32):
    g = tr_euc32.grid
    i = int(np.argmin(np.hypot(g.x, g.y)))
    tau = tr_euc32.exit_time_field().values[i].real
    r = np.hypot(g.x[i], g.y[i])
    assert np.abs(tau - 1.0).max() <= r + 1e-9


def test_u_f_boundary_values_are_ray_transform(tr_cc32):
    f = ScalarField.from_function(tr_cc32.grid, gaussian)
    data = tr_cc32.forward(f)
    assert np.abs(tr_cc32.boundary_u_f(f).values - data.values).max() < 1e-12


def test_zero_phantom_zero_data(tr_cc32):
    g = tr_cc32.grid
    data = tr_cc32.forward(ScalarField(g, np.zeros(g.n_nodes)), gaussian_attenuation(g))
    assert np.abs(data.values).max() == 0.0


@pytest.mark.parametrize("with_a", [False, True])
def test_adjoint_identity_coarse(tr_cc32, with_a):
    a = gaussian_attenuation(tr_cc32.grid) if with_a else None
    # coarse smoke version; the 64/128 check lives in the acceptance suite
    assert max(adjoint_defects(tr_cc32, 3, a)) < 5e-2


def test_normal_operator_symmetric(tr_euc32):
    from geoxray.selftest import _random_pair

    g = tr_euc32.grid
    a = gaussian_attenuation(g)
    F, G = _random_pair(g, 1), _random_pair(g, 2)
    w = tr_euc32.attenuation_weight(a)
    NF = tr_euc32.normal_operator(a, F, w)
    NG = tr_euc32.normal_operator(a, G, w)
    l, r = tr_euc32.pair_pairing(NF, G), tr_euc32.pair_pairing(F, NG)
    assert abs(l - r) / abs(l) < 2e-2
    assert tr_euc32.pair_pairing(NF, F).real > 0


def test_gauge_pair_invisible(tr_euc32):
    g = tr_euc32.grid
    a = gaussian_attenuation(g)
    ap, dp = gauge_pair(g, a)
    num = np.abs(tr_euc32.forward((ap, dp), a).values).max()
    den = np.abs(tr_euc32.forward(ScalarField(g, gauge_profile(g.x, g.y)), a).values).max()
    assert num / den < 1e-3


def test_solenoidal_decompose_exact_form():
    res = []
    for n in (24, 48):
        g = DiscGrid(n)
        p = gauge_profile(g.x, g.y)
        a_s, pp, r = solenoidal_decompose(MetricModel.euclidean(), OneFormField.exact(g, p))
        res.append(r)
    assert res[1] < 5e-3 and res[1] < res[0] / 2
    assert np.abs(pp.values - p).max() < 5e-3
    assert a_s.norm() < 1e-2 * OneFormField.exact(g, p).norm()


def test_solenoidal_decompose_keeps_star_exact():
    g = DiscGrid(48)
    q = gaussian(g.x, g.y, (0.1, 0.0), 0.2, support=0.8)
    alpha = OneFormField.star_exact(g, q)
    a_s, pp, res = solenoidal_decompose(MetricModel.constant_curvature(-0.5), alpha)
    assert np.abs(pp.values).max() < 1e-4 * np.abs(q).max()
    assert (a_s - alpha).norm() < 1e-4 * alpha.norm()


def test_u_F_modal_and_tensor_agree(tr_cc32):
    g = tr_cc32.grid
    F = BundleField.from_function(g, 64, lambda x, y, t: gaussian(x, y) * (1 + 0.3 * np.cos(t)), tr_cc32.metric)
    u1 = tr_cc32.u_F(F)
    u2 = tr_cc32.u_F(F, max_modal=0)
    assert np.abs(u1.values - u2.values).max() < 1e-3 * np.abs(u1.values).max()


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError):
        Transport(MetricModel.euclidean(2.0), DiscGrid(16), 16)
