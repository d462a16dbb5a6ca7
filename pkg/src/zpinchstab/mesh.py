"""Radial meshes, Lagrange bases, and Gauss quadrature for the two regions.

The plasma interval (0, r0) is graded toward both ends (1/r weights at the
axis, degenerate p and rho at the edge); the vacuum interval (r0, rw) is
graded toward r0 only.  Quadrature nodes never touch r = 0, so integrands
with 1/r and 1/r^2 weights are evaluated at interior points only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadGrading

__all__ = [
    "RadialGrid",
    "FemSpace",
    "make_grid",
    "quadrature",
    "plasma_space",
    "vacuum_space",
]

XI, ETA, ZETA = 0, 1, 2  # field slots in the plasma space


def _geometric_widths(length: float, n: int, ratio: float) -> np.ndarray:
    """n widths summing to `length`, consecutive ratio `ratio` (increasing)."""
    if ratio == 1.0:
        return np.full(n, length / n)
    w0 = length * (ratio - 1.0) / (ratio**n - 1.0)
    return w0 * ratio ** np.arange(n)


@dataclass(frozen=True)
class RadialGrid:
    """Sorted element vertices covering one region."""

    region: str  # "plasma" | "vacuum"
    nodes: np.ndarray
    grading: str  # "uniform" | "geometric"
    ratio: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
            raise BadGrading("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)


def make_grid(
    region: str,
    n_elements: int,
    grading_ratio: float,
    r0: float = 1.0,
    rw: float | None = None,
) -> RadialGrid:
    """Build a graded grid for one region.

    grading_ratio is the consecutive element-width ratio; 1 gives a uniform
    grid.  Plasma grids are symmetric with the smallest elements at both
    ends; vacuum grids have the smallest elements at r0.
    """
    if n_elements < 4:
        raise BadGrading("need at least 4 elements")
    if not (1.0 <= grading_ratio <= 20.0):
        raise BadGrading("grading_ratio must lie in [1, 20]")
    if region == "plasma":
        start, end = 0.0, r0
    elif region == "vacuum":
        if rw is None or rw <= r0:
            raise BadGrading("vacuum grid needs rw > r0")
        start, end = r0, rw
    else:
        raise BadGrading(f"unknown region {region!r}")

    if grading_ratio == 1.0:
        nodes = np.linspace(start, end, n_elements + 1)
        return RadialGrid(region, nodes, "uniform", 1.0)

    length = end - start
    if region == "plasma":
        n_left = n_elements - n_elements // 2
        n_right = n_elements // 2
        left = _geometric_widths(length / 2.0, n_left, grading_ratio)
        right = _geometric_widths(length / 2.0, n_right, grading_ratio)[::-1]
        widths = np.concatenate([left, right])
    else:
        widths = _geometric_widths(length, n_elements, grading_ratio)
    nodes = start + np.concatenate([[0.0], np.cumsum(widths)])
    nodes[-1] = end
    return RadialGrid(region, nodes, "geometric", grading_ratio)


# Lagrange bases on the reference element t in [0, 1].
def _basis_tables(order: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and t-derivatives of the local basis at points t; shape (nt, order+1)."""
    if order == 1:
        phi = np.stack([1.0 - t, t], axis=-1)
        dphi = np.stack([-np.ones_like(t), np.ones_like(t)], axis=-1)
    elif order == 2:
        phi = np.stack(
            [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)],
            axis=-1,
        )
        dphi = np.stack([4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0], axis=-1)
    else:
        raise BadGrading("order must be 1 or 2")
    return phi, dphi


@dataclass(frozen=True)
class FemSpace:
    """Scalar Lagrange space on a RadialGrid, replicated over `nfields` fields.

    Essential constraints are (node_index, field) pairs eliminated from the
    free-dof set; the remaining dofs are numbered node-major (all fields of
    node 0, then node 1, ...), which keeps the assembled matrices banded.
    """

    grid: RadialGrid
    order: int
    nfields: int
    essential_pins: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.order not in (1, 2):
            raise BadGrading("order must be 1 or 2")
        n_nodes = self.order * self.grid.n_elements + 1
        positions = np.empty(n_nodes)
        verts = self.grid.nodes
        if self.order == 1:
            positions[:] = verts
        else:
            positions[0::2] = verts
            positions[1::2] = 0.5 * (verts[:-1] + verts[1:])
        free = np.zeros((n_nodes, self.nfields), dtype=np.int64)
        for node, fld in self.essential_pins:
            if not (0 <= node < n_nodes and 0 <= fld < self.nfields):
                raise BadGrading("essential pin outside the space")
            free[node, fld] = -1
        count = 0
        for node in range(n_nodes):
            for fld in range(self.nfields):
                if free[node, fld] == 0:
                    free[node, fld] = count
                    count += 1
        object.__setattr__(self, "node_positions", positions)
        object.__setattr__(self, "free_index", free)
        object.__setattr__(self, "n_free", count)

    @property
    def n_nodes(self) -> int:
        return self.order * self.grid.n_elements + 1

    @property
    def n_elements(self) -> int:
        return self.grid.n_elements

    def element_node_indices(self) -> np.ndarray:
        """(n_elements, order+1) global node indices per element."""
        e = np.arange(self.n_elements)[:, None]
        a = np.arange(self.order + 1)[None, :]
        return self.order * e + a

    def quad_rule(self, npts: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Per-element Gauss points and dr-weights, shapes (n_elements, npts)."""
        npts = self.order + 3 if npts is None else npts
        x, w = np.polynomial.legendre.leggauss(npts)
        t = 0.5 * (x + 1.0)
        wt = 0.5 * w
        h = self.grid.widths
        r = self.grid.nodes[:-1, None] + h[:, None] * t[None, :]
        weights = h[:, None] * wt[None, :]
        return r, weights

    def basis_at(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _basis_tables(self.order, np.asarray(t, dtype=float))

    def quad_basis(
        self, npts: int | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Quadrature geometry plus basis tables in global coordinates.

        Returns (r, w, phi, dphi): radii and dr-weights of shape
        (n_elements, npts), basis values and global first derivatives of
        shape (n_elements, npts, order+1).
        """
        npts = self.order + 3 if npts is None else npts
        x, wg = np.polynomial.legendre.leggauss(npts)
        t = 0.5 * (x + 1.0)
        wt = 0.5 * wg
        h = self.grid.widths
        r = self.grid.nodes[:-1, None] + h[:, None] * t[None, :]
        w = h[:, None] * wt[None, :]
        phi_ref, dphi_ref = _basis_tables(self.order, t)
        ne = self.n_elements
        phi = np.broadcast_to(phi_ref, (ne,) + phi_ref.shape).copy()
        dphi = dphi_ref[None, :, :] / h[:, None, None]
        return r, w, phi, dphi

    def evaluate(self, nodal: np.ndarray, r, deriv: int = 0) -> np.ndarray:
        """Evaluate the FE function with the given nodal values (length n_nodes)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        verts = self.grid.nodes
        e = np.clip(np.searchsorted(verts, r, side="right") - 1, 0, self.n_elements - 1)
        h = self.grid.widths[e]
        t = (r - verts[e]) / h
        phi, dphi = _basis_tables(self.order, t)
        tab = phi if deriv == 0 else dphi / h[:, None]
        conn = self.element_node_indices()[e]
        return np.sum(np.asarray(nodal)[conn] * tab, axis=1)

    def full_vector(self, free_values: np.ndarray) -> np.ndarray:
        """Scatter free-dof values into (n_nodes, nfields), zeros at pins."""
        out = np.zeros((self.n_nodes, self.nfields))
        mask = self.free_index >= 0
        out[mask] = np.asarray(free_values)[self.free_index[mask]]
        return out


def quadrature(space: FemSpace) -> list[tuple[float, float]]:
    """Flattened (r, w) pairs of the per-element Gauss rule; no node at r=0."""
    r, w = space.quad_rule()
    return list(zip(r.ravel().tolist(), w.ravel().tolist()))


def plasma_space(grid: RadialGrid, order: int, m: int) -> FemSpace:
    """Three-field displacement space with the axis pins the mode family needs.

    m = 0 pins the radial and azimuthal components at r=0 (the axial one
    stays free); m != 0 pins all three.
    """
    pins = [(0, XI), (0, ZETA)] if m == 0 else [(0, XI), (0, ETA), (0, ZETA)]
    return FemSpace(grid, order, 3, tuple(pins))


def vacuum_space(grid: RadialGrid, order: int) -> FemSpace:
    """Single-field space for the radial vacuum unknown, pinned at the wall."""
    n_nodes = order * grid.n_elements + 1
    return FemSpace(grid, order, 1, ((n_nodes - 1, 0),))
