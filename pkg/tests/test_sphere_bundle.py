import numpy as np
import pytest

from geoxray import BoundaryField, BundleField, MetricModel, OutsideDomain, ScalarField
from geoxray.sphere_bundle import (
    angular_fourier,
    average,
    evaluate,
    geodesic_field_derivative,
    hilbert,
    holo_project,
    inverse_angular_fourier,
    parity_split,
    perp_field_derivative,
    scalar_geodesic_derivative,
    scalar_perp_derivative,
)

N = 64
TH = 2 * np.pi * np.arange(N) / N


@pytest.mark.parametrize("k", [-5, -1, 1, 3, 31])
def test_hilbert_pure_modes(k):
    e = np.exp(1j * k * TH)
    assert np.abs(hilbert(e) - (-1j * np.sign(k)) * e).max() < 1e-12


def test_hilbert_kills_mean_and_nyquist():
    assert np.abs(hilbert(np.ones(N))).max() < 1e-15
    assert np.abs(hilbert(np.cos(N // 2 * TH))).max() < 1e-12


def test_hilbert_square(rng):
    u = rng.standard_normal((5, N))
    u -= np.cos(N // 2 * TH) * (u @ np.cos(N // 2 * TH))[:, None] / N  # drop the Nyquist mode
    lhs = hilbert(hilbert(u))
    rhs = -u + u.mean(axis=1, keepdims=True)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_fft_roundtrip(rng):
    u = rng.standard_normal((4, N)) + 1j * rng.standard_normal((4, N))
    assert np.abs(inverse_angular_fourier(angular_fourier(u)) - u).max() < 1e-12


def test_parity_split():
    u = 1 + np.cos(TH) + np.sin(2 * TH) + np.cos(3 * TH)
    ev, od = parity_split(u)
    assert np.allclose(ev, 1 + np.sin(2 * TH))
    assert np.allclose(od, np.cos(TH) + np.cos(3 * TH))


def test_holo_project():
    u = 2.0 + np.exp(1j * TH) + np.exp(-2j * TH)
    assert np.allclose(holo_project(u, 1), 2.0 + 2 * np.exp(1j * TH))
    assert np.allclose(holo_project(u, -1), 2.0 + 2 * np.exp(-2j * TH))


def test_average_of_bundle_field(grid32):
    u = BundleField.from_function(grid32, 16, lambda x, y, t: x + np.cos(t))
    m = average(u)
    assert isinstance(m, ScalarField)
    assert np.allclose(m.values, grid32.x)


def test_bundle_modes_and_wrappers(grid32):
    u = BundleField.from_function(grid32, 16, lambda x, y, t: y * np.exp(2j * t))
    C = u.modes()
    assert C.shape == (grid32.n_nodes, 16)
    assert np.allclose(C[:, 2], grid32.y)
    h = hilbert(u)
    assert isinstance(h, BundleField)
    assert np.allclose(h.values, -1j * u.values)


@pytest.mark.parametrize("metric", [MetricModel.euclidean(), MetricModel.constant_curvature(-0.5)])
def test_field_derivatives_on_functions(grid32, metric):
    # on a function, the modal X and X_perp agree with the direct formulas
    f = ScalarField.from_function(grid32, lambda x, y: np.sin(x) * np.cos(2 * y))
    u = BundleField.from_scalar(f, 16, metric)
    X = geodesic_field_derivative(u, metric).values
    Xp = perp_field_derivative(u, metric).values
    assert np.abs(X - scalar_geodesic_derivative(f, 16, metric).values).max() < 1e-12
    assert np.abs(Xp - scalar_perp_derivative(f, 16, metric).values).max() < 1e-12


def test_geodesic_derivative_accuracy():
    from geoxray import DiscGrid

    errs = []
    for n in (16, 32):
        g = DiscGrid(n)
        f = ScalarField.from_function(g, lambda x, y: np.sin(2 * x + y))
        X = geodesic_field_derivative(BundleField.from_scalar(f, 16)).values
        exact = 2 * np.cos(2 * g.x + g.y)[:, None] * np.cos(TH[::4])[None] + np.cos(2 * g.x + g.y)[:, None] * np.sin(TH[::4])[None]
        inner = np.hypot(g.x, g.y) < 0.7
        errs.append(np.abs(X - exact)[inner].max())
    assert errs[1] < errs[0] / 8  # fourth order differences


def test_evaluate_outside_raises(grid32):
    u = BundleField.from_function(grid32, 8, lambda x, y, t: x + 0 * t)
    with pytest.raises(OutsideDomain):
        evaluate(u, 1.5, 0.0, 0.0)
    assert abs(evaluate(u, 0.31, -0.2, 1.0)[0] - 0.31) < 1e-10


def test_boundary_field_layout():
    b = BoundaryField.zeros(16)
    assert b.psi[0, 8] == 0.0  # theta = pi at phi = 0 points at the centre
    assert b.psi[0, 0] == -np.pi
    mask = b.inflow_mask
    assert mask.sum() == 16 * 7  # tangent nodes are excluded
    tab = np.arange(16 * 9, dtype=float).reshape(16, 9)
    back = BoundaryField.from_inflow_table(tab).inflow_table()
    assert np.allclose(back[:, 1:-1], tab[:, 1:-1])


def test_boundary_field_rejects_unequal_sizes():
    with pytest.raises(ValueError):
        BoundaryField(np.zeros((8, 16)))
