import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsqhelm.mesh import (
    build_decomposition,
    build_mesh,
    count_interface_dofs,
    dump_mesh,
    subdomain_size_to_elements,
)

UNIT = ((0.0, 0.0), (1.0, 1.0))


def test_duct_mesh_counts():
    mesh = build_mesh(((0, 0), (2, 1)), 56, 28)
    assert mesh.n_elements == 1568
    assert mesh.n_interior_edges == 3052
    assert count_interface_dofs(mesh, 3) == 12208
    assert mesh.h == pytest.approx(1 / 28)


def test_single_cell():
    mesh = build_mesh(UNIT, 1, 1)
    assert (mesh.n_elements, mesh.n_interior_edges, mesh.n_boundary_edges) == (1, 0, 4)


def test_two_cells_owner_is_larger_index():
    mesh = build_mesh(UNIT, 2, 1)
    assert mesh.n_interior_edges == 1
    assert (mesh.owner[0], mesh.neighbor[0]) == (1, 0)
    assert mesh.owner_local[0] == 3 and mesh.neighbor_local[0] == 1
    assert np.allclose(mesh.owner_normal()[0], [-1, 0])


@pytest.mark.parametrize("domain,nx,ny", [(UNIT, 0, 3), (UNIT, 2, 0), (((0, 0), (0, 1)), 2, 2),
                                          (UNIT, 8, 2)])
def test_build_mesh_errors(domain, nx, ny):
    with pytest.raises(ValueError):
        build_mesh(domain, nx, ny)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12))
def test_topology_invariants(nx, ny):
    if max(nx, ny) > 2 * min(nx, ny):
        return
    mesh = build_mesh(UNIT, nx, ny)
    assert mesh.n_interior_edges == nx * (ny - 1) + (nx - 1) * ny
    assert np.all(mesh.owner > mesh.neighbor)
    # each interior edge appears in exactly two element slots, boundary slots are -1
    slots = mesh.element_edges.ravel()
    counts = np.bincount(slots[slots >= 0], minlength=mesh.n_interior_edges)
    assert np.all(counts == 2)
    assert np.sum(slots < 0) == mesh.n_boundary_edges == 2 * (nx + ny)
    # owner/neighbour slots are opposite local edges and geometrically adjacent
    assert np.all((mesh.owner_local + 2) % 4 == mesh.neighbor_local)
    o = mesh.element_origin(mesh.owner)
    nb = mesh.element_origin(mesh.neighbor)
    step = np.abs(o - nb).sum(axis=1)
    assert np.allclose(step, np.where(mesh.owner_local == 0, mesh.hy, mesh.hx))
    # cells tile the domain
    assert mesh.n_elements * mesh.hx * mesh.hy == pytest.approx(1.0)


def _check_layout(layout):
    mesh = layout.mesh
    all_elems = np.arange(mesh.n_elements)
    # every element in exactly one subdomain; layer and interior partition D_r
    for r in range(layout.n_subdomains):
        dr = all_elems[layout.subdomain_of == r]
        parts = np.concatenate([layout.boundary_layer[r], layout.interior[r]])
        assert np.array_equal(np.sort(parts), dr)
        assert len(np.intersect1d(layout.boundary_layer[r], layout.interior[r])) == 0
    # Gamma splits into strips and vertex cells, disjointly
    pieces = [ce.elements for ce in layout.coarse_edges] + [layout.vertex_element]
    stacked = np.concatenate(pieces)
    assert len(stacked) == len(np.unique(stacked))
    assert np.array_equal(np.sort(stacked), layout.interface_elements())
    for ce in layout.coarse_edges:
        assert np.all(np.isin(ce.elements, ce.band))
        assert np.all(np.isin(ce.band, np.concatenate(
            [ce.elements, layout.interior[ce.r], layout.interior[ce.l]])))


@pytest.mark.parametrize("nx,ny,m", [(8, 8, 4), (12, 8, 4), (16, 8, 8), (12, 12, 3), (6, 6, 6), (8, 8, 2)])
def test_decomposition_invariants(nx, ny, m):
    layout = build_decomposition(build_mesh(((0, 0), (nx / ny, 1)), nx, ny), m)
    _check_layout(layout)
    assert len(layout.vertices) == (layout.nsx - 1) * (layout.nsy - 1)


def test_band_width_is_about_d():
    mesh = build_mesh(UNIT, 16, 16)
    layout = build_decomposition(mesh, 8)
    for ce in layout.coarse_edges:
        ix, iy = mesh.element_ij(ce.band)
        across = ix if ce.vertical else iy
        assert across.max() - across.min() + 1 == 8


def test_vertex_edges_surround_vertex():
    mesh = build_mesh(UNIT, 8, 8)
    layout = build_decomposition(mesh, 4)
    (vi, vj), = layout.vertices
    assert layout.vertex_element[0] == mesh.element_index(vi * 4 - 1, vj * 4)
    up, down, left, right = (layout.coarse_edges[i] for i in layout.vertex_edges[0])
    assert up.vertical and down.vertical and not left.vertical and not right.vertical


def test_single_subdomain_layout():
    layout = build_decomposition(build_mesh(UNIT, 4, 4), 4)
    assert layout.n_subdomains == 1 and not layout.coarse_edges and not layout.vertices
    assert len(layout.interior[0]) == 16


def test_decomposition_errors():
    mesh = build_mesh(UNIT, 8, 8)
    with pytest.raises(ValueError):
        build_decomposition(mesh, 3)
    with pytest.raises(ValueError):
        build_decomposition(mesh, 1)


def test_subdomain_size_selection():
    assert subdomain_size_to_elements(build_mesh(UNIT, 64, 64), None) == 8
    assert subdomain_size_to_elements(build_mesh(UNIT, 36, 36), None) == 6
    assert subdomain_size_to_elements(build_mesh(((0, 0), (2, 1)), 128, 64), 1 / 8) == 8
    assert subdomain_size_to_elements(build_mesh(UNIT, 7, 7), None) == 7
    with pytest.raises(ValueError):
        subdomain_size_to_elements(build_mesh(UNIT, 7, 5), None)


def test_dump_mesh(tmp_path):
    mesh = build_mesh(UNIT, 4, 4)
    path = dump_mesh(mesh, tmp_path / "mesh.json", build_decomposition(mesh, 2))
    data = json.loads(path.read_text())
    assert len(data["interior_edges"]) == 24
    assert len(data["layout"]["vertices"]) == 1
