"""Command line front-end.

Subcommands ``forward``, ``reconstruct``, ``factors``, ``selftest`` and
``adjoint-check``.  Exit codes: 0 ok, 1 failed check, 2 I/O, 3 config or
backend mismatch, 4 solver divergence.

Config (JSON)::

    {
      "metric": {"kind": "euclidean", "radius": 1.0},
      "grid": {"n_x": 64, "ntheta": 128},
      "attenuation": 0.5,
      "phantom": {"components": [{"type": "gaussian", "center": [0.2, 0.1], "sigma": 0.15}]},
      "reconstruction": {"i0_backend": "LeastSquares"},
      "seed": 0
    }

``attenuation`` is a number or a list of phantom components.  ``phantom``
may instead be ``{"mode": "gauge"}`` for the pair ``(a p, dp)``.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io as gio
from .errors import BackendMismatch, ConfigError, GeoXrayError
from .geometry import MetricModel
from .grid import DiscGrid, ScalarField
from .phantoms import gauge_pair, mixture, support_radius
from .sphere_bundle import BoundaryField
from .transport import Transport

log = logging.getLogger("geoxray")

DEFAULTS = {
    "metric": {"kind": "euclidean", "radius": 1.0},
    "grid": {"n_x": 64, "ntheta": 128},
    "attenuation": 0.0,
    "phantom": {"components": [{"type": "gaussian", "center": [0.2, 0.1], "sigma": 0.15}]},
    "reconstruction": {},
    "seed": 0,
}
SUPPORT_MARGIN = 0.05


# -- config -----------------------------------------------------------------------
def resolve_config(raw: dict, grid=None, backend=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k] = {**cfg[k], **v}
        else:
            cfg[k] = v
    if grid is not None:
        cfg["grid"] = {"n_x": grid[0], "ntheta": grid[1]}
    if backend is not None:
        cfg["reconstruction"] = {**cfg["reconstruction"], "i0_backend": backend}
    g = cfg["grid"]
    if not isinstance(g.get("n_x"), int) or not isinstance(g.get("ntheta"), int):
        raise ConfigError("grid.n_x and grid.ntheta must be integers")
    nt = g["ntheta"]
    if nt < 8 or nt & (nt - 1):
        raise ConfigError(f"grid.ntheta must be a power of two >= 8, got {nt}")
    try:
        metric = MetricModel.from_dict(cfg["metric"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"metric: {exc}") from exc
    ph = cfg["phantom"]
    if ph.get("mode") not in (None, "gauge"):
        raise ConfigError(f"phantom.mode must be 'gauge' when given, got {ph.get('mode')!r}")
    comps = ph.get("components", [])
    if ph.get("mode") != "gauge":
        r = support_radius(comps)
        if r > metric.radius - SUPPORT_MARGIN * metric.radius:
            raise ConfigError(f"phantom support radius {r:.3g} exceeds radius minus margin")
    from .inversion import ReconstructionConfig

    ReconstructionConfig.from_dict(cfg["reconstruction"])  # validates
    return cfg


def build(cfg):
    metric = MetricModel.from_dict(cfg["metric"])
    grid = DiscGrid(cfg["grid"]["n_x"], metric.radius)
    tr = Transport(metric, grid, cfg["grid"]["ntheta"])
    att = cfg["attenuation"]
    if isinstance(att, (int, float)):
        a = ScalarField(grid, np.full(grid.n_nodes, float(att)))
    else:
        a = mixture(grid, att)
    return metric, grid, tr, a


def build_phantom(cfg, grid, a):
    ph = cfg["phantom"]
    if ph.get("mode") == "gauge":
        return gauge_pair(grid, a)
    return mixture(grid, ph.get("components", []))


def _header(cfg, name, **extra):
    return {"field": name, "config_hash": gio.config_hash(cfg), "metric": cfg["metric"], "grid": cfg["grid"], **extra}


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


# -- commands ---------------------------------------------------------------------
def cmd_forward(cfg, out_dir: Path):
    metric, grid, tr, a = build(cfg)
    F = build_phantom(cfg, grid, a)
    use_a = a if np.any(a.values != 0) else None
    t0 = time.perf_counter()
    sino = tr.forward(F, use_a)
    elapsed = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    sums = {"sinogram.bin": gio.write_field(out_dir / "sinogram.bin", sino.values, _header(cfg, "sinogram"))}
    gio.write_sinogram_csv(out_dir / "sinogram.csv", sino)
    # plot data: the psi = 0 profile over phi (column n/4 of the inflow table)
    prof = sino.inflow_table()[:, sino.n // 4]
    gio.write_profile_csv(out_dir / "profile_psi0.csv", {"phi": sino.phi, "re": prof.real, "im": prof.imag})
    meta = {"config": cfg, "config_hash": gio.config_hash(cfg), "checksums": sums, "seconds": elapsed,
            "clamped_entries": tr.stats.clamped_entries}
    _write_json(out_dir / "metadata.json", meta)
    log.info("forward: wrote %s", out_dir)
    return 0


def cmd_reconstruct(cfg, sinogram_path, out_dir: Path, force=False):
    from .inversion import ReconstructionConfig, reconstruct_attenuated

    vals, head = gio.read_field(sinogram_path)
    if head.get("config_hash") != gio.config_hash(cfg) and not force:
        raise ConfigError("sinogram was produced with a different config (use --force to override)")
    metric, grid, tr, a = build(cfg)
    if vals.shape != (tr.ntheta, tr.ntheta):
        raise ConfigError(f"sinogram shape {vals.shape} does not match ntheta={tr.ntheta}")
    sino = BoundaryField(vals, metric.radius, metric)
    rc = ReconstructionConfig.from_dict(cfg["reconstruction"])
    f, diag = reconstruct_attenuated(tr, a, sino, rc)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep = diag.as_dict()
    ph = cfg.get("phantom", {})
    if ph.get("components") and ph.get("mode") != "gauge":
        truth = mixture(grid, ph["components"]).values
        rep["rel_L2_error"] = float(np.linalg.norm(f.values - truth) / max(np.linalg.norm(truth), 1e-300))
    rep["config_hash"] = gio.config_hash(cfg)
    gio.write_field(out_dir / "reconstruction.bin", f.values, _header(cfg, "reconstruction"))
    on_axis = np.abs(grid.y) < 0.5 * grid.dx
    order = np.argsort(grid.x[on_axis])
    gio.write_profile_csv(out_dir / "profile_x_axis.csv",
                          {"x": grid.x[on_axis][order], "f": np.real(f.values[on_axis][order])})
    _write_json(out_dir / "report.json", rep)
    log.info("reconstruct: wrote %s", out_dir)
    return 0


def cmd_factors(cfg, out_dir: Path):
    from .holomorphic import integrating_factor

    metric, grid, tr, a = build(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep = {}
    for sign, name in ((1, "w"), (-1, "w_tilde")):
        w, r = integrating_factor(tr, a, sign, with_report=True)
        gio.write_field(out_dir / f"{name}.bin", w.values, _header(cfg, name))
        rep[name] = r.as_dict()
    rep["config_hash"] = gio.config_hash(cfg)
    _write_json(out_dir / "factors_report.json", rep)
    return 0


def cmd_selftest(level, out_dir: Path, mutate=False):
    from . import selftest, sphere_bundle

    saved = sphere_bundle._HILBERT_SIGN
    if mutate:
        sphere_bundle._HILBERT_SIGN = -1.0
    try:
        checks = selftest.run_suite(level)
    finally:
        sphere_bundle._HILBERT_SIGN = saved
    rep = selftest.report(checks, level)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "selftest.json", rep)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (threshold {c.threshold:.1e}) {c.detail}")
    return 0 if rep["passed"] else 1


def cmd_adjoint_check(cfg, out_dir: Path, n_pairs=10, tol=1e-3):
    from .selftest import adjoint_defects

    metric, grid, tr, a = build(cfg)
    use_a = a if np.any(a.values != 0) else None
    defects = adjoint_defects(tr, n_pairs, use_a, seed=cfg.get("seed", 0))
    rep = {"defects": defects, "max": max(defects), "threshold": tol, "passed": max(defects) <= tol,
           "config_hash": gio.config_hash(cfg)}
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "adjoint_check.json", rep)
    print(f"{'PASS' if rep['passed'] else 'FAIL'} max relative defect {rep['max']:.3e} (threshold {tol:.0e})")
    return 0 if rep["passed"] else 1


# -- entry point ------------------------------------------------------------------
def _grid_arg(s):
    try:
        nx, nt = (int(v) for v in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected NX,NTHETA")
    return nx, nt


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    common.add_argument("--grid", type=_grid_arg, default=None, help="override grid as NX,NTHETA")
    common.add_argument("--backend", choices=["ExplicitCC", "FredholmW2", "LeastSquares"], default=None)
    common.add_argument("--force", action="store_true", help="accept a sinogram with a different config hash")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="geoxray", description="Attenuated geodesic ray transform on discs.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("forward", parents=[common], help="compute a sinogram")
    r = sub.add_parser("reconstruct", parents=[common], help="reconstruct from a sinogram")
    r.add_argument("sinogram", type=Path)
    sub.add_parser("factors", parents=[common], help="integrating factors and their residuals")
    s = sub.add_parser("selftest", parents=[common], help="run the invariant suite")
    s.add_argument("--level", choices=["quick", "full"], default="quick")
    s.add_argument("--mutate-hilbert", action="store_true", help=argparse.SUPPRESS)
    a = sub.add_parser("adjoint-check", parents=[common], help="adjoint identity on random pairs")
    a.add_argument("--pairs", type=int, default=10)
    a.add_argument("--tol", type=float, default=1e-3)
    return p


def _set_threads(n):
    if n is None:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    _set_threads(args.threads)
    try:
        if args.command == "selftest":
            return cmd_selftest(args.level, args.out_dir, args.mutate_hilbert)
        raw = gio.load_config(args.config) if args.config else {}
        cfg = resolve_config(raw, args.grid, args.backend)
        if args.command == "forward":
            return cmd_forward(cfg, args.out_dir)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, args.sinogram, args.out_dir, args.force)
        if args.command == "factors":
            return cmd_factors(cfg, args.out_dir)
        if args.command == "adjoint-check":
            return cmd_adjoint_check(cfg, args.out_dir, args.pairs, args.tol)
    except GeoXrayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
