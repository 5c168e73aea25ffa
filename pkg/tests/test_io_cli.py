import json

import numpy as np
import pytest
from scipy.integrate import quad

from geoxray import ConfigError
from geoxray import io as gio
from geoxray.cli import main, resolve_config
from geoxray.phantoms import gaussian, smooth_cutoff


def write_cfg(path, **over):
    cfg = {"grid": {"n_x": 32, "ntheta": 64}, "attenuation": 0.0}
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return path


def test_field_roundtrip(tmp_path):
    v = (np.arange(12) + 1j).reshape(3, 4)
    digest = gio.write_field(tmp_path / "f.bin", v, {"field": "x"})
    back, head = gio.read_field(tmp_path / "f.bin")
    assert np.array_equal(back, v.astype(np.complex64))
    assert head["shape"] == [3, 4] and head["field"] == "x"
    assert len(digest) == 64


def test_truncated_field_rejected(tmp_path):
    gio.write_field(tmp_path / "f.bin", np.ones(8), {})
    raw = (tmp_path / "f.bin").read_bytes()
    (tmp_path / "g.bin").write_bytes(raw[:-3])
    with pytest.raises(gio.FieldFileError):
        gio.read_field(tmp_path / "g.bin")


def test_config_hash_is_order_free():
    assert gio.config_hash({"a": 1, "b": [1, 2]}) == gio.config_hash({"b": [1, 2], "a": 1})
    assert gio.config_hash({"a": 1}) != gio.config_hash({"a": 2})


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "grid": {"n_x": 32,,}\n}')
    with pytest.raises(ConfigError, match=":2:"):
        gio.load_config(p)
    assert main(["forward", "--config", str(p), "--out-dir", str(tmp_path)]) == 3


def test_resolve_config_validation():
    with pytest.raises(ConfigError):
        resolve_config({"colour": 1})
    with pytest.raises(ConfigError):
        resolve_config({"grid": {"n_x": 32, "ntheta": 48}})
    with pytest.raises(ConfigError):
        resolve_config({"phantom": {"components": [{"type": "bump", "center": [0.5, 0], "radius": 0.5}]}})
    cfg = resolve_config({}, grid=(16, 32), backend="ExplicitCC")
    assert cfg["grid"] == {"n_x": 16, "ntheta": 32}
    assert cfg["reconstruction"]["i0_backend"] == "ExplicitCC"


@pytest.fixture(scope="module")
def forward_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("fwd")
    cfg = write_cfg(d / "cfg.json")
    assert main(["forward", "--config", str(cfg), "--out-dir", str(d / "out")]) == 0
    return d


def test_forward_profile_matches_quadrature(forward_run):
    prof = np.loadtxt(forward_run / "out" / "profile_psi0.csv", delimiter=",", skiprows=1)
    phi, re = prof[:, 0], prof[:, 1]
    for j in (0, 5, 17, 40):
        c, s = np.cos(phi[j]), np.sin(phi[j])
        exact, _ = quad(lambda t: gaussian(np.array([t * c]), np.array([t * s]))[0], -1, 1, points=[0.2, 0.3], limit=200)
        assert abs(re[j] - exact) < 5e-3 * max(abs(exact), 0.1)


def test_forward_outputs(forward_run):
    out = forward_run / "out"
    meta = json.loads((out / "metadata.json").read_text())
    vals, head = gio.read_field(out / "sinogram.bin")
    assert head["config_hash"] == meta["config_hash"]
    rows = gio.read_sinogram_csv(out / "sinogram.csv")
    assert rows.shape == (64 * 31, 4)


def test_forward_is_deterministic(forward_run, tmp_path):
    cfg = forward_run / "cfg.json"
    assert main(["forward", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "sinogram.bin").read_bytes() == (forward_run / "out" / "sinogram.bin").read_bytes()


def test_zero_phantom(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", phantom={"components": []})
    assert main(["forward", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    vals, _ = gio.read_field(tmp_path / "sinogram.bin")
    assert np.abs(vals).max() == 0.0


def test_gauge_phantom_near_zero(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", attenuation=0.5, phantom={"mode": "gauge"})
    assert main(["forward", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    vals, _ = gio.read_field(tmp_path / "sinogram.bin")
    assert np.abs(vals).max() < 1e-3


def test_reconstruct_round_trip(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", attenuation=0.5)
    assert main(["forward", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert main(["reconstruct", str(tmp_path / "sinogram.bin"), "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["rel_L2_error"] <= 0.05
    for key in ("per_step_residuals", "holomorphicity_reports", "backend", "iterations", "timings"):
        assert key in rep
    # a sinogram from another config is refused unless forced
    other = write_cfg(tmp_path / "o.json", attenuation=0.4)
    args = ["reconstruct", str(tmp_path / "sinogram.bin"), "--config", str(other), "--out-dir", str(tmp_path / "o")]
    assert main(args) == 3
    assert main(args + ["--force"]) == 0


def test_missing_sinogram_exit_code(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    assert main(["reconstruct", str(tmp_path / "nope.bin"), "--config", str(cfg)]) == 2


def test_backend_mismatch_exit_code(tmp_path):
    metric = {"kind": "perturbed", "epsilon": 0.05, "bump_spec": {"center": [0.1, 0.0], "width": 0.3}}
    cfg = write_cfg(tmp_path / "c.json", metric=metric, attenuation=0.3)
    assert main(["forward", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    rc = main(["reconstruct", str(tmp_path / "sinogram.bin"), "--config", str(cfg), "--backend", "ExplicitCC",
               "--force", "--out-dir", str(tmp_path)])
    assert rc == 3


def test_factors_command(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", attenuation=[{"type": "gaussian", "sigma": 0.35, "support": 0.8}])
    assert main(["factors", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "factors_report.json").read_text())
    assert rep["w"]["holomorphicity"] < 1e-20 and rep["w_tilde"]["holomorphicity"] < 1e-20


def test_adjoint_check_command(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", grid={"n_x": 32, "ntheta": 64})
    rc = main(["adjoint-check", "--config", str(cfg), "--pairs", "2", "--tol", "5e-2", "--out-dir", str(tmp_path)])
    assert rc == 0


def test_selftest_mutation_fails_first(tmp_path, capsys):
    rc = main(["selftest", "--mutate-hilbert", "--out-dir", str(tmp_path)])
    assert rc == 1
    rep = json.loads((tmp_path / "selftest.json").read_text())
    first = rep["checks"][0]
    assert first["name"] == "hilbert_spectral" and not first["passed"]


def test_smooth_cutoff_limits():
    r = np.array([0.0, 0.7, 0.75, 0.8, 1.0])
    c = smooth_cutoff(r)
    assert c[0] == 1.0 and c[1] == 1.0 and c[3] == 0.0 and c[4] == 0.0
    assert abs(c[2] - 0.5) < 1e-12
