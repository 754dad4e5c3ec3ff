"""Structured criss-cross triangulations of the rectangular fault domain.

The domain is a width x height rectangle split into nx x ny cells, each cell
cut into four triangles by its centroid.  Plates move along the top and
bottom edges (Dirichlet), the left and right edges are traction boundaries
(Neumann).  A horizontal stripe centered at mid-height carries the initial
damage; a wider stripe selects elements for reaction-force averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Geometry", "Mesh", "generate_mesh", "make_grid",
           "element_geometry", "initial_damage"]


@dataclass(frozen=True)
class Geometry:
    """Rectangular domain with centered horizontal stripes (meters)."""

    width: float = 400.0
    height: float = 100.0
    damaged_stripe_height: float = 8.0
    fault_stripe_height: float = 20.0

    def __post_init__(self):
        if self.width <= 0.0 or self.height <= 0.0:
            raise ValueError("domain dimensions must be positive")
        # A zero damaged stripe is allowed (uniformly intact initial state).
        if not (0.0 <= self.damaged_stripe_height
                <= self.fault_stripe_height < self.height):
            raise ValueError(
                "stripes must satisfy 0 <= damaged <= fault < height, got "
                f"damaged={self.damaged_stripe_height}, "
                f"fault={self.fault_stripe_height}, height={self.height}")


@dataclass
class Mesh:
    """Immutable triangle mesh with boundary tags and cached P1 geometry.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
        Node coordinates.
    triangles : (n_tri, 3) int array
        Connectivity, counter-clockwise.
    dirichlet_nodes : (n_d,) int array
        Nodes on the top and bottom edges (corners included).
    neumann_edges : (n_e, 2) int array
        Boundary edges on the left and right edges.
    level : int
        Refinement level used by :func:`generate_mesh` (0 for custom grids).
    areas, grads, centroids
        Cached per-element area, P1 basis gradients (n_tri, 3, 2) and
        centroid coordinates; computed on construction.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    dirichlet_nodes: np.ndarray
    neumann_edges: np.ndarray
    level: int = 0
    areas: np.ndarray = field(init=False, repr=False)
    grads: np.ndarray = field(init=False, repr=False)
    centroids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.dirichlet_nodes = np.asarray(self.dirichlet_nodes, dtype=np.int64)
        self.neumann_edges = np.asarray(self.neumann_edges,
                                        dtype=np.int64).reshape(-1, 2)
        p = self.nodes[self.triangles]                     # (n_tri, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.any(signed <= 0.0):
            bad = int(np.argmin(signed))
            raise ValueError(f"degenerate or inverted element {bad} "
                             f"(signed area {signed[bad]:.3e})")
        self.areas = signed
        # grad of barycentric i is perp(edge opposite i) / (2A)
        grads = np.empty((len(self.triangles), 3, 2))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            grads[:, i, 0] = p[:, j, 1] - p[:, k, 1]
            grads[:, i, 1] = p[:, k, 0] - p[:, j, 0]
        grads /= (2.0 * signed)[:, None, None]
        self.grads = grads
        self.centroids = p.mean(axis=1)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    def free_mask(self) -> np.ndarray:
        """Boolean mask over the 2*n_nodes displacement dofs, False on the
        Dirichlet boundary."""
        mask = np.ones(2 * self.n_nodes, dtype=bool)
        mask[2 * self.dirichlet_nodes] = False
        mask[2 * self.dirichlet_nodes + 1] = False
        return mask


def make_grid(geometry: Geometry, nx: int, ny: int) -> Mesh:
    """Criss-cross mesh of nx x ny cells, each split into 4 triangles.

    Grid nodes come first in row-major order, cell centroids after.  The top
    and bottom edges are tagged Dirichlet (corners included), the left and
    right edges Neumann.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid must have at least one cell per direction")
    xs = np.linspace(0.0, geometry.width, nx + 1)
    ys = np.linspace(0.0, geometry.height, ny + 1)
    gx, gy = np.meshgrid(xs, ys)                           # row-major in y
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    ccx, ccy = np.meshgrid(cx, cy)
    centers = np.column_stack([ccx.ravel(), ccy.ravel()])
    nodes = np.vstack([grid, centers])

    n_grid = (nx + 1) * (ny + 1)
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix, iy = ix.ravel(), iy.ravel()
    sw = iy * (nx + 1) + ix
    se = sw + 1
    nw = sw + (nx + 1)
    ne = nw + 1
    c = n_grid + iy * nx + ix
    # four CCW triangles per cell, fanned around the centroid
    triangles = np.empty((4 * nx * ny, 3), dtype=np.int64)
    triangles[0::4] = np.column_stack([sw, se, c])
    triangles[1::4] = np.column_stack([se, ne, c])
    triangles[2::4] = np.column_stack([ne, nw, c])
    triangles[3::4] = np.column_stack([nw, sw, c])

    bottom = np.arange(nx + 1)
    top = ny * (nx + 1) + np.arange(nx + 1)
    dirichlet = np.concatenate([bottom, top])
    left = np.arange(ny) * (nx + 1)
    right = left + nx
    neumann = np.vstack([
        np.column_stack([left, left + (nx + 1)]),
        np.column_stack([right, right + (nx + 1)]),
    ])
    return Mesh(nodes=nodes, triangles=triangles, dirichlet_nodes=dirichlet,
                neumann_edges=neumann, level=0)


def generate_mesh(geometry: Geometry, level: int) -> Mesh:
    """Criss-cross mesh with a 9 x 8 base grid refined `level` times.

    Level L gives nx = 9*2^L by ny = 8*2^L cells, hence 4*nx*ny triangles
    and (nx+1)*(ny+1) + nx*ny nodes.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    mesh = make_grid(geometry, 9 * 2**level, 8 * 2**level)
    mesh.level = level
    return mesh


def element_geometry(mesh: Mesh, element: int):
    """Area and the three constant P1 basis gradients of one element."""
    return mesh.areas[element], mesh.grads[element]


def initial_damage(mesh: Mesh, geometry: Geometry) -> np.ndarray:
    """Nodal damage field: 0.5 strictly inside the centered damaged stripe,
    1.0 (intact) elsewhere."""
    y = mesh.nodes[:, 1]
    half = 0.5 * geometry.damaged_stripe_height
    zeta = np.ones(mesh.n_nodes)
    zeta[np.abs(y - 0.5 * geometry.height) < half] = 0.5
    return zeta
