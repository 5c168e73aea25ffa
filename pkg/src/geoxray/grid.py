"""Cartesian grid masked to the disc, and fields living on it.

Nodes are ``x_i = -R + (i - pad) dx`` with ``dx = 2R / (n_x - 1)``, so the
``n_x`` central nodes span the closed diameter and ``pad`` extra nodes on each
side hold an extension of the field used by interpolation and differencing
stencils near the boundary.  The extension is a local least-squares cubic fit
through nearby interior nodes; it is linear in the data and stored as a
sparse matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .errors import SolverDiverged

_PAD = 4
_FIT_NEIGHBOURS = 24


def _cubic_basis(dx, dy):
    return np.stack(
        [np.ones_like(dx), dx, dy, dx * dx, dx * dy, dy * dy, dx ** 3, dx * dx * dy, dx * dy * dy, dy ** 3],
        axis=-1,
    )


class DiscGrid:
    """Masked Cartesian grid on the disc of radius ``radius``.

    Parameters
    ----------
    n_x : int
        Number of nodes across the diameter.
    radius : float
    pad : int
        Extra nodes on each side of the bounding box.
    """

    def __init__(self, n_x: int, radius: float = 1.0, pad: int = _PAD):
        if n_x < 8:
            raise ValueError("n_x must be at least 8")
        self.n_x = int(n_x)
        self.radius = float(radius)
        self.pad = int(pad)
        self.dx = 2.0 * radius / (n_x - 1)
        self.n_full = n_x + 2 * pad
        self.origin = -radius - pad * self.dx
        self.coords = self.origin + self.dx * np.arange(self.n_full)
        X, Y = np.meshgrid(self.coords, self.coords)  # arrays are indexed [iy, ix]
        self.X, self.Y = X, Y
        r = np.hypot(X, Y)
        self.mask = r <= radius * (1 + 1e-12)
        self.flat_index = np.flatnonzero(self.mask)
        self.x = X.ravel()[self.flat_index]
        self.y = Y.ravel()[self.flat_index]
        self.n_nodes = self.flat_index.size

    def __repr__(self):
        return f"DiscGrid(n_x={self.n_x}, radius={self.radius}, nodes={self.n_nodes})"

    def __eq__(self, other):
        return isinstance(other, DiscGrid) and (self.n_x, self.radius, self.pad) == (
            other.n_x, other.radius, other.pad)

    def __hash__(self):
        return hash((self.n_x, self.radius, self.pad))

    @property
    def cell_area(self):
        return self.dx * self.dx

    # -- extension ----------------------------------------------------------
    @cached_property
    def extension(self) -> sp.csr_matrix:
        """Sparse map from node values to the full padded array (row-major)."""
        n_full2 = self.n_full ** 2
        r = np.hypot(self.X, self.Y).ravel()
        reach = self.radius + 3.0 * self.dx
        outer = np.flatnonzero((~self.mask.ravel()) & (r <= reach))
        tree = cKDTree(np.column_stack([self.x, self.y]))
        px = self.X.ravel()[outer]
        py = self.Y.ravel()[outer]
        # fit centred at the nearest point of the circle
        scale = r[outer] / self.radius
        cx = px / scale
        cy = py / scale
        _, nb = tree.query(np.column_stack([cx, cy]), k=_FIT_NEIGHBOURS)
        rows = [self.flat_index]
        cols = [np.arange(self.n_nodes)]
        vals = [np.ones(self.n_nodes)]
        for j, o in enumerate(outer):
            idx = nb[j]
            B = _cubic_basis((self.x[idx] - cx[j]) / self.dx, (self.y[idx] - cy[j]) / self.dx)
            b = _cubic_basis(np.array([(px[j] - cx[j]) / self.dx]), np.array([(py[j] - cy[j]) / self.dx]))[0]
            w = np.linalg.lstsq(B.T, b, rcond=None)[0]  # minimum norm weights reproducing cubics
            rows.append(np.full(idx.size, o))
            cols.append(idx)
            vals.append(w)
        E = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_full2, self.n_nodes),
        )
        return E

    def extend(self, values: np.ndarray) -> np.ndarray:
        """Padded ``(n_full, n_full, ...)`` array from node values ``(n_nodes, ...)``."""
        v = np.asarray(values)
        tail = v.shape[1:]
        out = self.extension @ v.reshape(self.n_nodes, -1)
        return out.reshape((self.n_full, self.n_full) + tail)

    def restrict(self, full: np.ndarray) -> np.ndarray:
        full = np.asarray(full)
        return full.reshape((self.n_full ** 2,) + full.shape[2:])[self.flat_index]

    # -- differencing -------------------------------------------------------
    @cached_property
    def _central(self):
        """Fourth order central differences on the padded array, rows = nodes."""
        n = self.n_full
        iy, ix = np.divmod(self.flat_index, n)
        coef = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * self.dx)
        offs = np.array([-2, -1, 1, 2])
        rows = np.repeat(np.arange(self.n_nodes), 4)
        cx = ((iy[:, None]) * n + ix[:, None] + offs[None, :]).ravel()
        cy = ((iy[:, None] + offs[None, :]) * n + ix[:, None]).ravel()
        v = np.tile(coef, self.n_nodes)
        Dx = sp.csr_matrix((v, (rows, cx)), shape=(self.n_nodes, n * n))
        Dy = sp.csr_matrix((v, (rows, cy)), shape=(self.n_nodes, n * n))
        return Dx, Dy

    @cached_property
    def d_dx(self) -> sp.csr_matrix:
        """Node-to-node x derivative (extension followed by central differences)."""
        return (self._central[0] @ self.extension).tocsr()

    @cached_property
    def d_dy(self) -> sp.csr_matrix:
        return (self._central[1] @ self.extension).tocsr()

    def gradient(self, values):
        return self.d_dx @ values, self.d_dy @ values

    # -- Dirichlet Laplacian ------------------------------------------------
    @cached_property
    def _dirichlet_lu(self):
        n = self.n_full
        R = self.radius
        h = self.dx
        mask = self.mask.ravel()
        node_of = -np.ones(n * n, dtype=np.int64)
        # strictly interior unknowns; nodes on the circle carry the boundary value
        r = np.hypot(self.x, self.y)
        interior = r < R * (1 - 1e-12)
        unk = self.flat_index[interior]
        node_of[unk] = np.arange(unk.size)
        rows, cols, vals = [], [], []
        for k, gi in enumerate(unk):
            iy, ix = divmod(gi, n)
            x0, y0 = self.coords[ix], self.coords[iy]
            diag = 0.0
            arms = []
            for dxs, dys, nb in ((1, 0, gi + 1), (-1, 0, gi - 1), (0, 1, gi + n), (0, -1, gi - n)):
                if node_of[nb] >= 0:
                    arms.append((h, nb))
                else:
                    # distance to the circle along the arm
                    b = x0 * dxs + y0 * dys
                    c = x0 * x0 + y0 * y0 - R * R
                    t = -b + np.sqrt(b * b - c)
                    arms.append((min(max(t, 1e-3 * h), h), -1))
            # Shortley-Weller: arms (east, west, north, south)
            (he, ne), (hw, nw), (hn, nn), (hs, ns) = arms
            for hh, other, nb in ((he, hw, ne), (hw, he, nw), (hn, hs, nn), (hs, hn, ns)):
                w = 2.0 / (hh * (hh + other))
                diag -= w
                if nb >= 0:
                    rows.append(k)
                    cols.append(node_of[nb])
                    vals.append(w)
            rows.append(k)
            cols.append(k)
            vals.append(diag)
        A = sp.csc_matrix((vals, (rows, cols)), shape=(unk.size, unk.size))
        return spla.splu(A), interior

    def solve_dirichlet(self, rhs):
        """Solve ``Lap p = rhs`` with ``p = 0`` on the circle; node values in and out.

        The Shortley-Weller matrix is not symmetric, so a sparse LU factorisation
        replaces an iterative solve.
        """
        lu, interior = self._dirichlet_lu
        rhs = np.asarray(rhs)
        p = np.zeros(self.n_nodes, dtype=rhs.dtype)
        if np.iscomplexobj(rhs):
            p[interior] = lu.solve(rhs[interior].real) + 1j * lu.solve(rhs[interior].imag)
        else:
            p[interior] = lu.solve(rhs[interior])
        if not np.all(np.isfinite(p)):
            raise SolverDiverged("Dirichlet solve produced non-finite values")
        return p

    # -- quadrature ---------------------------------------------------------
    def integrate(self, values, weight=None):
        """Sum of ``values * weight`` times the cell area over the disc nodes."""
        v = np.asarray(values)
        if weight is not None:
            v = v * weight
        return v.sum(axis=0) * self.cell_area


@dataclass
class ScalarField:
    """Function on the grid nodes."""

    grid: DiscGrid
    values: np.ndarray

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, np.asarray(fn(grid.x, grid.y)))

    def padded(self) -> np.ndarray:
        return self.grid.extend(self.values)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass
class OneFormField:
    """1-form ``alpha_1 dx + alpha_2 dy`` by chart components on the nodes."""

    grid: DiscGrid
    alpha1: np.ndarray
    alpha2: np.ndarray
    solenoidal: bool = False

    @classmethod
    def zeros(cls, grid, dtype=float):
        return cls(grid, np.zeros(grid.n_nodes, dtype), np.zeros(grid.n_nodes, dtype))

    @classmethod
    def exact(cls, grid, p):
        """``dp`` for node values ``p``."""
        return cls(grid, grid.d_dx @ p, grid.d_dy @ p)

    @classmethod
    def star_exact(cls, grid, q):
        """``*dq = -q_y dx + q_x dy``; divergence free."""
        return cls(grid, -(grid.d_dy @ q), grid.d_dx @ q, solenoidal=True)

    def codifferential(self):
        """Euclidean divergence; ``delta alpha`` up to the factor ``-exp(-2 lam)``."""
        g = self.grid
        return g.d_dx @ self.alpha1 + g.d_dy @ self.alpha2

    def __add__(self, other):
        return OneFormField(self.grid, self.alpha1 + other.alpha1, self.alpha2 + other.alpha2)

    def __sub__(self, other):
        return OneFormField(self.grid, self.alpha1 - other.alpha1, self.alpha2 - other.alpha2)

    def __mul__(self, c):
        return OneFormField(self.grid, self.alpha1 * c, self.alpha2 * c, self.solenoidal)

    __rmul__ = __mul__

    def norm(self):
        return float(np.sqrt(self.grid.integrate(np.abs(self.alpha1) ** 2 + np.abs(self.alpha2) ** 2)))


def _vals(o):
    return o.values if isinstance(o, ScalarField) else o
