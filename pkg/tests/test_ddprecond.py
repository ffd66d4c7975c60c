import numpy as np
import pytest

from lsqhelm.ddprecond import (
    apply_preconditioner,
    build_coarse_space,
    build_local_solvers,
    build_preconditioner,
    edge_dofs,
)
from lsqhelm.interface import cg_solve
from lsqhelm.mesh import build_decomposition
from lsqhelm.problems import make_duct, make_lens
from lsqhelm.verification import interface_system, pointwise_dense_S


@pytest.fixture(scope="module")
def lens8():
    sys_ = interface_system(make_lens(8.0), 8, 8, 2, 4)
    layout = build_decomposition(sys_.mesh, 4)
    return sys_, layout, build_preconditioner(layout, sys_)


@pytest.fixture(scope="module")
def lens12():
    sys_ = interface_system(make_lens(12.0), 12, 12, 1, 3)
    layout = build_decomposition(sys_.mesh, 3)
    return sys_, layout, build_preconditioner(layout, sys_)


def _crand(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_subspace_matrices_are_principal_submatrices(lens8):
    sys_, layout, K = lens8
    dense = pointwise_dense_S(sys_)
    for s in K.interior + K.bands:
        assert np.allclose(s.matrix, dense[np.ix_(s.dofs, s.dofs)], atol=1e-13 * np.abs(dense).max())
        assert np.allclose(s.matrix, s.matrix.conj().T)


def test_interior_dofs_lie_inside_interiors(lens8):
    sys_, layout, K = lens8
    mesh = sys_.mesh
    nq = sys_.ops.edge_basis.size
    for s in K.interior:
        edges = np.unique(s.dofs // nq)
        inside = layout.interior[s.subdomain]
        assert np.all(np.isin(mesh.owner[edges], inside))
        assert np.all(np.isin(mesh.neighbor[edges], inside))


def test_band_and_interior_sizes_are_balanced():
    sys_ = interface_system(make_lens(8.0), 16, 16, 1, 3)
    K = build_preconditioner(build_decomposition(sys_.mesh, 8), sys_)
    n0 = np.median([s.size for s in K.interior])
    for b in K.bands:
        assert 0.5 * n0 <= b.size <= 2 * n0


def test_coarse_basis_equals_unit_vector_on_vertex_element(lens8):
    sys_, layout, K = lens8
    nq = sys_.ops.edge_basis.size
    Phi = K.coarse.basis.toarray()
    for v, elem in enumerate(layout.vertex_element):
        edges = sys_.mesh.element_edges[elem]
        dofs = edge_dofs(edges[edges >= 0], nq)
        cols = K.coarse.vertex_columns[v]
        assert np.allclose(Phi[np.ix_(dofs, cols)], np.eye(len(dofs)))
        # outside its support the basis is zero on the other vertex cells
        others = np.setdiff1d(np.arange(sys_.dim), np.concatenate(
            [dofs] + [b.dofs for b in K.bands] + [s.dofs for s in K.interior]))
        assert np.allclose(Phi[np.ix_(others, cols)], 0.0)


def test_band_minimisation_lowers_energy(lens8):
    sys_, layout, K = lens8
    S = sys_.assemble()
    interior, bands = K.interior, K.bands
    nq = sys_.ops.edge_basis.size
    elem = layout.vertex_element[0]
    dof = edge_dofs(sys_.mesh.element_edges[elem][:1], nq)[0]
    e = np.zeros(sys_.dim, dtype=complex)
    e[dof] = 1.0
    phi = e.copy()
    Se = S @ e
    for s in interior:
        phi[s.dofs] -= s.solve(Se[s.dofs])
    base = np.vdot(phi, S @ phi).real
    final = K.coarse.basis[:, K.coarse.vertex_columns[0][0]].toarray().ravel()
    assert np.vdot(final, S @ final).real <= base
    for ce in layout.vertex_edges[0]:
        b = bands[ce]
        trial = phi.copy()
        trial[b.dofs] -= b.solve((S @ phi)[b.dofs])
        assert np.vdot(trial, S @ trial).real <= base + 1e-14


def test_coarse_matrix_is_galerkin_product(lens8):
    sys_, _, K = lens8
    Phi = K.coarse.basis.toarray()
    cols = np.column_stack([sys_.matvec(c) for c in Phi.T])
    assert np.allclose(K.coarse.matrix, Phi.conj().T @ cols, atol=1e-12 * np.abs(K.coarse.matrix).max())


def test_preconditioner_hermitian_positive(lens12, rng):
    sys_, _, K = lens12
    for _ in range(100):
        x, y = _crand(rng, sys_.dim), _crand(rng, sys_.dim)
        kx, ky = K(x), K(y)
        assert abs(np.vdot(y, kx) - np.vdot(x, ky).conjugate()) <= 1e-10 * abs(np.vdot(y, kx))
        assert np.vdot(x, kx).real > 0


def test_zero_maps_to_zero(lens8):
    sys_, _, K = lens8
    assert np.all(apply_preconditioner(K, np.zeros(sys_.dim)) == 0)
    with pytest.raises(ValueError):
        K(np.zeros(sys_.dim + 1))


def test_single_subdomain_is_exact_solve():
    sys_ = interface_system(make_lens(4.0), 4, 4, 2, 4)
    layout = build_decomposition(sys_.mesh, 4)
    K = build_preconditioner(layout, sys_)
    assert K.coarse.size == 0 and not K.bands and K.n_gamma == 0
    lam, rep = cg_solve(sys_, sys_.rhs, K, tol=1e-10)
    assert rep.converged and rep.iterations <= 1


def test_no_interior_vertex_gives_empty_coarse_space():
    sys_ = interface_system(make_duct(5 * np.pi, 2), 8, 4, 2, 4)
    layout = build_decomposition(sys_.mesh, 4)
    interior, bands = build_local_solvers(layout, sys_)
    coarse = build_coarse_space(layout, sys_, (interior, bands))
    assert coarse.size == 0 and len(bands) == 1
    K = build_preconditioner(layout, sys_)
    _, rep = cg_solve(sys_, sys_.rhs, K, tol=1e-8)
    assert rep.converged


def test_pcg_beats_cg_on_duct():
    sys_ = interface_system(make_duct(8 * np.pi, 5), 32, 16, 2, 4)
    K = build_preconditioner(build_decomposition(sys_.mesh, 4), sys_)
    _, rc = cg_solve(sys_, sys_.rhs, tol=1e-6)
    _, rp = cg_solve(sys_, sys_.rhs, K, tol=1e-6)
    assert rc.converged and rp.converged
    assert rp.iterations < rc.iterations


@pytest.mark.parametrize("m", [2, 3, 4])
def test_every_subdomain_size_covers_gamma(m, rng):
    sys_ = interface_system(make_lens(8.0), 12, 12, 1, 3)
    K = build_preconditioner(build_decomposition(sys_.mesh, m), sys_)
    x = _crand(rng, sys_.dim)
    assert np.vdot(x, K(x)).real > 0
