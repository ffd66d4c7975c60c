"""Uniform rectangular meshes, edge topology, and the substructuring layout.

Elements are numbered row-major, ``k = iy * nx + ix`` with ``iy = 0`` the
bottom row. An interior edge is owned by the element with the larger index,
so every element owns its bottom and left edges (when they are interior).
Local edge numbering inside an element is 0 bottom, 1 right, 2 top, 3 left.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MeshTopology",
    "build_mesh",
    "count_interface_dofs",
    "DecompositionLayout",
    "CoarseEdge",
    "build_decomposition",
    "dump_mesh",
]

# outward unit normals of local edges 0..3
LOCAL_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
OPPOSITE = np.array([2, 3, 0, 1])


@dataclass(frozen=True, eq=False)
class MeshTopology:
    domain_lo: tuple[float, float]
    domain_hi: tuple[float, float]
    nx: int
    ny: int
    hx: float
    hy: float
    # interior edges
    owner: np.ndarray = field(repr=False)
    neighbor: np.ndarray = field(repr=False)
    owner_local: np.ndarray = field(repr=False)
    neighbor_local: np.ndarray = field(repr=False)
    # (n_elements, 4): interior edge index per local edge, -1 on the boundary
    element_edges: np.ndarray = field(repr=False)
    # boundary edges
    boundary_element: np.ndarray = field(repr=False)
    boundary_local: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_interior_edges(self) -> int:
        return len(self.owner)

    @property
    def n_boundary_edges(self) -> int:
        return len(self.boundary_element)

    def element_index(self, ix, iy):
        return np.asarray(iy) * self.nx + np.asarray(ix)

    def element_ij(self, k):
        k = np.asarray(k)
        return k % self.nx, k // self.nx

    def element_origin(self, k=None) -> np.ndarray:
        """Lower-left corners, shape ``(n, 2)``."""
        k = np.arange(self.n_elements) if k is None else np.atleast_1d(k)
        ix, iy = self.element_ij(k)
        return np.column_stack(
            [self.domain_lo[0] + ix * self.hx, self.domain_lo[1] + iy * self.hy]
        )

    def edge_length(self, local) -> np.ndarray:
        local = np.asarray(local)
        return np.where(local % 2 == 0, self.hx, self.hy)

    def owner_normal(self) -> np.ndarray:
        """Outward normal of the owner on every interior edge."""
        return LOCAL_NORMALS[self.owner_local]


def build_mesh(domain, nx: int, ny: int) -> MeshTopology:
    """Partition the rectangle ``((x0, y0), (x1, y1))`` into ``nx * ny`` cells."""
    (x0, y0), (x1, y1) = domain
    if nx < 1 or ny < 1:
        raise ValueError("element counts must be positive")
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate rectangle")
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny
    if max(hx, hy) / min(hx, hy) > 2.0 + 1e-12:
        raise ValueError(f"cell aspect ratio {max(hx, hy) / min(hx, hy):.3g} exceeds 2")

    n = nx * ny
    element_edges = -np.ones((n, 4), dtype=np.int64)
    owner, neighbor, olocal, nlocal = [], [], [], []
    belem, blocal = [], []
    for k in range(n):
        ix, iy = k % nx, k // nx
        # owned edges first (bottom, then left) keeps edge ids sorted by owner
        if iy > 0:
            element_edges[k, 0] = len(owner)
            element_edges[k - nx, 2] = len(owner)
            owner.append(k)
            neighbor.append(k - nx)
            olocal.append(0)
            nlocal.append(2)
        if ix > 0:
            element_edges[k, 3] = len(owner)
            element_edges[k - 1, 1] = len(owner)
            owner.append(k)
            neighbor.append(k - 1)
            olocal.append(3)
            nlocal.append(1)
    for k in range(n):
        ix, iy = k % nx, k // nx
        for e, on_bdry in enumerate((iy == 0, ix == nx - 1, iy == ny - 1, ix == 0)):
            if on_bdry:
                belem.append(k)
                blocal.append(e)
    as_int = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
    return MeshTopology(
        (float(x0), float(y0)),
        (float(x1), float(y1)),
        nx,
        ny,
        hx,
        hy,
        as_int(owner),
        as_int(neighbor),
        as_int(olocal),
        as_int(nlocal),
        element_edges,
        as_int(belem),
        as_int(blocal),
    )


def count_interface_dofs(mesh: MeshTopology, q: int) -> int:
    """Dimension of the interface space: (q + 1) per interior edge."""
    return (q + 1) * mesh.n_interior_edges


# --------------------------------------------------------------------------
# substructuring layout


@dataclass(frozen=True, eq=False)
class CoarseEdge:
    """One coarse edge between subdomains ``r`` and ``l``.

    For a vertical coarse edge ``r`` is the left subdomain; for a horizontal
    one ``r`` is the upper subdomain. ``elements`` is the interface strip
    (D_rl) and ``band`` its enlargement by nearby interior
    elements of both subdomains.
    """

    r: int
    l: int
    vertical: bool
    elements: np.ndarray
    band: np.ndarray


@dataclass(frozen=True, eq=False)
class DecompositionLayout:
    mesh: MeshTopology
    m: int  # elements per subdomain side
    nsx: int
    nsy: int
    subdomain_of: np.ndarray = field(repr=False)  # element -> subdomain
    boundary_layer: list = field(repr=False)  # per subdomain, D_r^b elements
    interior: list = field(repr=False)  # per subdomain, D_r^0 elements
    coarse_edges: list = field(repr=False)
    # interior coarse vertices: (I, J) grid index, D_V element, coarse-edge ids
    vertices: list = field(repr=False)
    vertex_element: np.ndarray = field(repr=False)
    vertex_edges: list = field(repr=False)

    @property
    def d(self) -> float:
        return self.m * self.mesh.h

    @property
    def n_subdomains(self) -> int:
        return self.nsx * self.nsy

    def interface_elements(self) -> np.ndarray:
        if not self.boundary_layer:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(self.boundary_layer))

    def is_interior_element(self) -> np.ndarray:
        """Boolean mask over elements: True inside some D_r^0."""
        mask = np.zeros(self.mesh.n_elements, dtype=bool)
        for block in self.interior:
            mask[block] = True
        return mask

    def edges_inside(self, elements) -> np.ndarray:
        """Interior mesh edges whose two elements both lie in ``elements``."""
        mask = np.zeros(self.mesh.n_elements, dtype=bool)
        mask[np.asarray(elements, dtype=np.int64)] = True
        mesh = self.mesh
        return np.flatnonzero(mask[mesh.owner] & mask[mesh.neighbor])


def build_decomposition(mesh: MeshTopology, elems_per_subdomain_side: int) -> DecompositionLayout:
    """Coarsen ``mesh`` into square subdomains of ``m`` elements per side.

    The interface layer of a subdomain is its right column and bottom row,
    omitting the sides that lie on the outer boundary. Coarse vertices on the
    outer boundary get no D_V; strips ending at such a vertex keep their end
    element so that the strips and the D_V cells partition the interface.
    """
    m = int(elems_per_subdomain_side)
    if m < 2:
        raise ValueError("subdomains need at least 2x2 elements")
    if mesh.nx % m or mesh.ny % m:
        raise ValueError(f"mesh {mesh.nx}x{mesh.ny} is not divisible by {m}")
    nx, ny = mesh.nx, mesh.ny
    nsx, nsy = nx // m, ny // m
    k = np.arange(mesh.n_elements)
    ix, iy = k % nx, k // nx
    sx, sy = ix // m, iy // m
    lx, ly = ix % m, iy % m
    subdomain_of = sy * nsx + sx
    in_layer = ((lx == m - 1) & (sx < nsx - 1)) | ((ly == 0) & (sy > 0))

    layer, interior = [], []
    for r in range(nsx * nsy):
        sel = subdomain_of == r
        layer.append(k[sel & in_layer])
        interior.append(k[sel & ~in_layer])
    interior_mask = ~in_layer

    def elem(i, j):
        return j * nx + i

    def vertex_is_interior(vi, vj):
        return 1 <= vi <= nsx - 1 and 1 <= vj <= nsy - 1

    # at least one D_r^0 column beyond the strip, so m = 2 covers Gamma too
    half = max(m / 2.0, 1.5)
    coarse_edges: list[CoarseEdge] = []
    edge_id: dict = {}
    # vertical coarse edges: between (a, b) and (a + 1, b)
    for b in range(nsy):
        for a in range(nsx - 1):
            col = (a + 1) * m - 1
            rows = list(range(b * m, (b + 1) * m))
            if vertex_is_interior(a + 1, b):
                rows = rows[1:]
            strip = np.array([elem(col, j) for j in rows], dtype=np.int64)
            band = [elem(i, j) for j in rows for i in range(a * m, (a + 2) * m)
                    if interior_mask[elem(i, j)] and abs(i + 0.5 - (a + 1) * m) <= half]
            band = np.unique(np.concatenate([strip, np.asarray(band, dtype=np.int64)]))
            edge_id[("v", a, b)] = len(coarse_edges)
            coarse_edges.append(CoarseEdge(b * nsx + a, b * nsx + a + 1, True, strip, band))
    # horizontal coarse edges: between upper (a, b) and lower (a, b - 1)
    for b in range(1, nsy):
        for a in range(nsx):
            row = b * m
            cols = list(range(a * m, (a + 1) * m))
            if vertex_is_interior(a + 1, b):
                cols = cols[:-1]
            strip = np.array([elem(i, row) for i in cols], dtype=np.int64)
            band = [elem(i, j) for i in cols for j in range((b - 1) * m, (b + 1) * m)
                    if interior_mask[elem(i, j)] and abs(j + 0.5 - b * m) <= half]
            band = np.unique(np.concatenate([strip, np.asarray(band, dtype=np.int64)]))
            edge_id[("h", a, b)] = len(coarse_edges)
            coarse_edges.append(CoarseEdge(b * nsx + a, (b - 1) * nsx + a, False, strip, band))

    vertices, vertex_element, vertex_edges = [], [], []
    for vj in range(1, nsy):
        for vi in range(1, nsx):
            vertices.append((vi, vj))
            vertex_element.append(elem(vi * m - 1, vj * m))
            vertex_edges.append([
                edge_id[("v", vi - 1, vj)],
                edge_id[("v", vi - 1, vj - 1)],
                edge_id[("h", vi - 1, vj)],
                edge_id[("h", vi, vj)],
            ])
    return DecompositionLayout(
        mesh, m, nsx, nsy, subdomain_of, layer, interior, coarse_edges,
        vertices, np.asarray(vertex_element, dtype=np.int64), vertex_edges,
    )


def subdomain_size_to_elements(mesh: MeshTopology, d: float | None) -> int:
    """Elements per subdomain side for a target size ``d`` (default ~ sqrt(h)).

    Picks the divisor of both element counts closest to ``d / h``.
    """
    target = (math.sqrt(mesh.h) if d is None else d) / mesh.h
    g = math.gcd(mesh.nx, mesh.ny)
    divisors = [m for m in range(2, g + 1) if g % m == 0]
    if not divisors:
        raise ValueError(f"no subdomain size divides the {mesh.nx}x{mesh.ny} mesh")
    return min(divisors, key=lambda m: (abs(m - target), m))


def dump_mesh(mesh: MeshTopology, path, layout: DecompositionLayout | None = None) -> Path:
    """Write elements, edges and (optionally) layout sets to a JSON file."""
    path = Path(path)
    data = {
        "domain": [list(mesh.domain_lo), list(mesh.domain_hi)],
        "nx": mesh.nx,
        "ny": mesh.ny,
        "h": mesh.h,
        "elements": mesh.element_origin().tolist(),
        "interior_edges": [
            {"owner": int(o), "neighbor": int(n), "owner_local": int(ol)}
            for o, n, ol in zip(mesh.owner, mesh.neighbor, mesh.owner_local)
        ],
        "boundary_edges": [
            {"element": int(e), "local": int(l)}
            for e, l in zip(mesh.boundary_element, mesh.boundary_local)
        ],
    }
    if layout is not None:
        data["layout"] = {
            "elements_per_side": layout.m,
            "boundary_layer": [b.tolist() for b in layout.boundary_layer],
            "interior": [b.tolist() for b in layout.interior],
            "coarse_edges": [
                {"r": c.r, "l": c.l, "vertical": c.vertical,
                 "strip": c.elements.tolist(), "band": c.band.tolist()}
                for c in layout.coarse_edges
            ],
            "vertices": [
                {"grid": list(v), "element": int(e), "coarse_edges": es}
                for v, e, es in zip(layout.vertices, layout.vertex_element, layout.vertex_edges)
            ],
        }
    path.write_text(json.dumps(data, indent=1))
    return path
