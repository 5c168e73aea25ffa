"""Field files: one JSON header line followed by little-endian complex64 data.

The data block is row-major.  Bundle fields are ``(node, angle)``, boundary
fields ``(phi, theta)`` and scalar fields one value per node.  Sinograms are
also written as CSV with columns ``phi, psi, re, im`` over inflow nodes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, GeoXrayError

_DTYPE = np.dtype("<c8")


class FieldFileError(GeoXrayError):
    exit_code = 2


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form, first 16 hex digits."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_field(path, values, header: dict) -> str:
    """Write ``values`` with ``header``; returns the SHA-256 of the file."""
    arr = np.ascontiguousarray(np.asarray(values), dtype=_DTYPE)
    head = dict(header)
    head["shape"] = list(arr.shape)
    head["dtype"] = "complex64-le"
    line = json.dumps(head, sort_keys=True).encode() + b"\n"
    data = line + arr.tobytes()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_field(path):
    """Return ``(values, header)``; values are complex128."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FieldFileError(f"cannot read {path}: {exc}") from exc
    nl = raw.find(b"\n")
    if nl < 0:
        raise FieldFileError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl])
    except json.JSONDecodeError as exc:
        raise FieldFileError(f"{path}: bad header ({exc})") from exc
    shape = tuple(header.get("shape", ()))
    body = raw[nl + 1:]
    if len(body) != int(np.prod(shape)) * _DTYPE.itemsize:
        raise FieldFileError(f"{path}: data size does not match shape {shape}")
    vals = np.frombuffer(body, dtype=_DTYPE).reshape(shape).astype(complex)
    return vals, header


def write_sinogram_csv(path, b):
    """Inflow nodes of a BoundaryField as ``phi, psi, re, im`` rows."""
    mask = b.inflow_mask
    phi = np.broadcast_to(b.phi[:, None], b.values.shape)[mask]
    psi = b.psi[mask]
    v = b.values[mask]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi", "psi", "re", "im"])
        for row in zip(phi, psi, v.real, v.imag):
            w.writerow([f"{x:.17g}" for x in row])


def read_sinogram_csv(path):
    """Rows as an ``(m, 4)`` float array."""
    try:
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise FieldFileError(f"cannot read {path}: {exc}") from exc


def write_profile_csv(path, columns: dict):
    """Plot data: equal-length named columns."""
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([f"{x:.17g}" if np.isrealobj(x) else f"{complex(x)!r}" for x in row])


def load_config(path) -> dict:
    """Read a JSON config, reporting the line of a syntax error."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FieldFileError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
