import json

from geoxray import MetricModel
from geoxray.cli import main
from geoxray.selftest import (
    chord_error,
    commutator_orders,
    fft_roundtrip_error,
    hilbert_spectral_error,
    hilbert_square_error,
    scattering_involution_error,
)

ORDER = [
    "hilbert_spectral",
    "hilbert_square",
    "fft_roundtrip",
    "commutator_order",
    "euclidean_chords",
    "scattering_involution",
    "adjoint_identity",
    "w_vanishing",
    "integrating_factor",
    "gauge_kernel",
    "holomorphic_solution",
    "backend_agreement",
]


def test_spectral_checks():
    assert hilbert_spectral_error() < 1e-12
    assert hilbert_square_error() < 1e-12
    assert fft_roundtrip_error() < 1e-12


def test_geometric_checks():
    assert chord_error() < 1e-9
    assert scattering_involution_error(MetricModel.constant_curvature(-0.5)) < 1e-8


def test_commutator_order_two_levels():
    res, orders = commutator_orders(MetricModel.euclidean(), ((16, 16), (32, 32)))
    assert res[1] < res[0]
    assert orders[0] > 1.8


def test_quick_suite_passes(tmp_path):
    assert main(["selftest", "--level", "quick", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "selftest.json").read_text())
    names = [c["name"] for c in rep["checks"]]
    assert names == ORDER
    for c in rep["checks"]:
        assert c["passed"], c
        assert "value" in c and "threshold" in c
