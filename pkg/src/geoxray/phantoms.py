"""Test functions: tapered Gaussians, polynomial bumps and the gauge profile."""

from __future__ import annotations

import numpy as np

from .grid import DiscGrid, OneFormField, ScalarField


def smooth_cutoff(r, r0=0.7, r1=0.8):
    """C-infinity step: 1 for ``r <= r0``, 0 for ``r >= r1``."""
    t = np.clip((np.asarray(r, float) - r0) / (r1 - r0), 0.0, 1.0)

    def g(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a, b = g(1.0 - t), g(t)
    return a / (a + b)


def gaussian(x, y, center=(0.2, 0.1), sigma=0.15, amplitude=1.0, support=0.8, taper=0.1):
    """Gaussian bump multiplied by a smooth cutoff vanishing for ``|x| >= support``."""
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    cut = smooth_cutoff(np.hypot(x, y), support - taper, support) if support else 1.0
    return amplitude * np.exp(-r2 / (2 * sigma ** 2)) * cut


def polynomial_bump(x, y, center=(0.0, 0.0), radius=0.5, power=4, amplitude=1.0):
    """``amplitude * (1 - |x - c|^2 / radius^2)_+^power``."""
    s = 1.0 - ((x - center[0]) ** 2 + (y - center[1]) ** 2) / radius ** 2
    return amplitude * np.where(s > 0, np.maximum(s, 0) ** power, 0.0)


def gauge_profile(x, y, radius=1.0):
    """``p = (1 - |x|^2 / R^2)^2``, zero on the boundary circle."""
    return (1.0 - (x * x + y * y) / radius ** 2) ** 2


def gauge_profile_gradient(x, y, radius=1.0):
    s = 1.0 - (x * x + y * y) / radius ** 2
    return -4 * s * x / radius ** 2, -4 * s * y / radius ** 2


def acceptance_phantom(grid: DiscGrid) -> ScalarField:
    return ScalarField.from_function(grid, gaussian)


def mixture(grid: DiscGrid, components) -> ScalarField:
    """Sum of components given as dicts ``{"type": "gaussian"|"bump", ...}``."""
    f = np.zeros(grid.n_nodes)
    for c in components:
        c = dict(c)
        kind = c.pop("type", "gaussian")
        if kind == "gaussian":
            f = f + gaussian(grid.x, grid.y, **c)
        elif kind == "bump":
            f = f + polynomial_bump(grid.x, grid.y, **c)
        else:
            raise ValueError(f"unknown phantom component {kind!r}")
    return ScalarField(grid, f)


def gauge_pair(grid: DiscGrid, a):
    """``(a p, dp)`` for the gauge profile, with ``dp`` from the closed form."""
    p = gauge_profile(grid.x, grid.y, grid.radius)
    px, py = gauge_profile_gradient(grid.x, grid.y, grid.radius)
    av = a.values if isinstance(a, ScalarField) else a
    return ScalarField(grid, av * p), OneFormField(grid, px, py)


def support_radius(components, tol=0.0):
    """Radius beyond which a mixture vanishes."""
    r = 0.0
    for c in components:
        if c.get("type", "gaussian") == "gaussian":
            r = max(r, c.get("support", 0.8) or np.inf)
        else:
            cx, cy = c.get("center", (0.0, 0.0))
            r = max(r, np.hypot(cx, cy) + c.get("radius", 0.5))
    return r + tol
