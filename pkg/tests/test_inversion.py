import numpy as np
import pytest

from geoxray import (
    BackendMismatch,
    ConfigError,
    DiscGrid,
    MetricModel,
    OneFormField,
    ReconstructionConfig,
    ScalarField,
    Transport,
)
from geoxray.inversion import (
    circle_hilbert,
    explicit_pair_scheme,
    harmonic_lift,
    invert_i0,
    invert_i0_explicit,
    invert_i0_fredholm,
    invert_i0_pairs,
    reconstruct_attenuated,
    verify_holomorphic_solution,
)
from geoxray.phantoms import gauge_pair, gaussian
from geoxray.selftest import gaussian_attenuation

PHI = 2 * np.pi * np.arange(64) / 64


def rel(u, v):
    return float(np.linalg.norm(np.asarray(u) - v) / np.linalg.norm(v))


def stream(x, y):
    # smooth, nonzero on the circle
    return gaussian(x, y, (0.1, -0.2), 0.4, support=0)


@pytest.fixture(scope="module")
def phantom(grid32):
    return ScalarField.from_function(grid32, gaussian)


def test_config_validation():
    with pytest.raises(ConfigError):
        ReconstructionConfig(i0_backend="Magic")
    with pytest.raises(ConfigError):
        ReconstructionConfig(pair_backend="direct")
    c = ReconstructionConfig.from_dict({"i0_backend": "FredholmW2", "unknown": 1})
    assert c.i0_backend == "FredholmW2"


def test_circle_hilbert_and_lift(grid32):
    assert np.abs(circle_hilbert(np.cos(3 * PHI)) - np.sin(3 * PHI)).max() < 1e-13
    assert np.abs(circle_hilbert(np.ones(64))).max() < 1e-15
    # harmonic extension of cos(phi) is x
    assert np.abs(harmonic_lift(grid32, np.cos(PHI)) - grid32.x).max() < 1e-13


@pytest.mark.parametrize("fixture", ["tr_euc32", "tr_cc32"])
def test_explicit_round_trip(request, fixture, phantom):
    tr = request.getfixturevalue(fixture)
    f = invert_i0_explicit(tr, tr.forward(phantom))
    assert rel(f.values, phantom.values) < 0.03


def test_explicit_rejects_perturbed(grid32, phantom):
    tr = Transport(MetricModel.perturbed(0.0, 0.05), grid32, 64)
    with pytest.raises(BackendMismatch):
        invert_i0_explicit(tr, tr.forward(phantom))
    with pytest.raises(BackendMismatch):
        reconstruct_attenuated(tr, 0.1, tr.forward(phantom, 0.1), ReconstructionConfig(i0_backend="ExplicitCC"))


def test_fredholm_equals_explicit_on_constant_curvature(tr_cc32, phantom):
    d = tr_cc32.forward(phantom)
    hist = []
    f1 = invert_i0_fredholm(tr_cc32, d, history=hist)
    f2 = invert_i0_explicit(tr_cc32, d)
    assert rel(f1.values, f2.values) < 1e-12


def test_fredholm_on_perturbed_metric(grid32, phantom):
    tr = Transport(MetricModel.perturbed(0.0, 0.05), grid32, 64)
    hist = []
    f = invert_i0_fredholm(tr, tr.forward(phantom), history=hist)
    assert rel(f.values, phantom.values) < 0.05
    assert len(hist) >= 1


@pytest.mark.parametrize("fixture", ["tr_euc32", "tr_cc32"])
def test_explicit_pair_scheme(request, fixture, phantom):
    tr = request.getfixturevalue(fixture)
    g = tr.grid
    q = stream(g.x, g.y)
    d = tr.forward((phantom, OneFormField.star_exact(g, q)))
    ph, qq = explicit_pair_scheme(tr, d, stream(np.cos(PHI), np.sin(PHI)))
    assert rel(ph.values, phantom.values) < 0.03
    assert rel(qq.values, q) < 0.02


def test_pairs_without_q_part(tr_cc32, phantom):
    ph, alpha, info = invert_i0_pairs(tr_cc32, tr_cc32.forward(phantom), ReconstructionConfig())
    assert info["backend"] == "explicit"
    assert rel(ph.values, phantom.values) < 0.03
    assert alpha.norm() < 0.05 * np.linalg.norm(phantom.values) * tr_cc32.grid.dx


def test_invert_i0_dispatch(tr_cc32, phantom):
    d = tr_cc32.forward(phantom)
    f = invert_i0(tr_cc32, d, ReconstructionConfig(i0_backend="ExplicitCC"))
    assert np.array_equal(f.values, invert_i0_explicit(tr_cc32, d).values)


@pytest.mark.parametrize("real_valued", [True, False])
def test_reconstruct_attenuated_coarse(tr_cc32, phantom, real_valued):
    a = gaussian_attenuation(tr_cc32.grid)
    cfg = ReconstructionConfig(i0_backend="ExplicitCC", real_valued=real_valued)
    f, diag = reconstruct_attenuated(tr_cc32, a, tr_cc32.forward(phantom, a), cfg)
    assert rel(f.values.real, phantom.values) < 0.03
    rep = diag.as_dict()
    assert set(rep) == {"backend", "per_step_residuals", "holomorphicity_reports", "iterations", "timings"}
    assert rep["per_step_residuals"]["u_hat_mean"] < 1e-12
    if not real_valued:
        assert "w_tilde" in str(rep["holomorphicity_reports"])


def test_reconstruct_zero_attenuation_fast_path(tr_cc32, phantom):
    f, diag = reconstruct_attenuated(tr_cc32, 0.0, tr_cc32.forward(phantom), ReconstructionConfig(i0_backend="ExplicitCC"))
    assert rel(f.values, phantom.values) < 0.03
    assert "factors" not in diag.timings


def test_gauge_data_does_not_change_reconstruction(tr_euc32, phantom):
    g = tr_euc32.grid
    a = gaussian_attenuation(g)
    cfg = ReconstructionConfig(i0_backend="ExplicitCC")
    d = tr_euc32.forward(phantom, a)
    f1, _ = reconstruct_attenuated(tr_euc32, a, d, cfg)
    f2, _ = reconstruct_attenuated(tr_euc32, a, d + tr_euc32.forward(gauge_pair(g, a), a), cfg)
    assert rel(f2.values, f1.values) < 1e-3


def test_reconstruction_of_zero(tr_euc32):
    g = tr_euc32.grid
    d = tr_euc32.forward(ScalarField(g, np.zeros(g.n_nodes)))
    f, _ = reconstruct_attenuated(tr_euc32, gaussian_attenuation(g), d, ReconstructionConfig(i0_backend="ExplicitCC"))
    assert np.abs(f.values).max() == 0.0


def test_holomorphic_solution(tr_euc32):
    from geoxray.phantoms import gauge_profile

    g = tr_euc32.grid
    p = ScalarField(g, gauge_profile(g.x, g.y) * np.exp(-g.x ** 2))
    r = verify_holomorphic_solution(tr_euc32, gaussian_attenuation(g), p)
    assert r["rhs_wrong_frequency_energy"] < 1e-20
    assert r["wrong_frequency_energy"] < 1e-4
    z = verify_holomorphic_solution(tr_euc32, gaussian_attenuation(g), np.zeros(g.n_nodes))
    assert z["wrong_frequency_energy"] == 0.0 and z["distance_to_exact"] == 0.0
