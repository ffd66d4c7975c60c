"""Element-local Helmholtz problems with Robin data on the element interfaces.

On every element we solve

    a_k(u, v) = L_k(v) + <(+/-) lambda, v>   on the interior edges of the element,

where the owner of an interior edge takes ``+`` (both in the Robin term and in
the data term) and the neighbour takes ``-``. Everything is batched over
elements: per element we keep the composed linear maps

* ``G_k = A_k^{-1} C_k`` (edge coefficients -> element coefficients), and
* ``B_k = T G_k``       (edge coefficients -> Legendre coefficients of the
  four edge traces),

so applying ``u1(lambda)`` or its adjoint is a batched matrix-vector product.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import EdgeBasis, ElementBasis, QuadratureRule, legendre_table, quadrature
from .mesh import LOCAL_NORMALS, MeshTopology

__all__ = [
    "ProblemCoefficients",
    "LocalOperator",
    "LocalSolvers",
    "SingularLocalProblem",
    "assemble_local",
    "assemble_element_matrices",
    "build_local_solvers",
    "solve_u1",
    "solve_u2",
    "solve_u1_adjoint",
]

log = logging.getLogger(__name__)

DEFAULT_RHO = 1e-5


class SingularLocalProblem(np.linalg.LinAlgError):
    """Raised when an element matrix cannot be factorised."""

    def __init__(self, element: int, msg: str = ""):
        super().__init__(f"local problem on element {element} is singular {msg}".strip())
        self.element = element


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape, dtype=complex)


def _zero_g(x, y, nx, ny):
    return np.zeros(np.broadcast(x, y).shape, dtype=complex)


def _unit(x, y):
    return np.ones(np.broadcast(x, y).shape)


@dataclass(frozen=True)
class ProblemCoefficients:
    """Data of -Lap u - kappa^2 u = f, du/dn + i kappa u = g, kappa = omega / c.

    ``wave_speed(x, y)`` and ``source(x, y)`` take coordinate arrays;
    ``boundary(x, y, nx, ny)`` also receives the outward normal.
    """

    omega: float
    wave_speed: Callable = _unit
    source: Callable = _zero
    boundary: Callable = _zero_g
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    def kappa(self, x, y):
        c = np.asarray(self.wave_speed(x, y), dtype=float)
        if np.any(c <= 0):
            raise ValueError("wave speed must be positive")
        return self.omega / c


@dataclass(frozen=True)
class LocalOperator:
    """Single-element view: system matrix, coupling and trace maps."""

    element: int
    matrix: np.ndarray  # A_k, rows = test functions
    coupling: np.ndarray  # C_k, (n_basis, 4 * (q + 1)); zero columns on the boundary
    trace: np.ndarray  # T, (4 * (p + 1), n_basis)
    load: np.ndarray  # load vector of (f, g)
    lu: tuple = field(repr=False, default=None)

    def solve(self, rhs, adjoint: bool = False):
        import scipy.linalg as sla

        return sla.lu_solve(self.lu, rhs, trans=2 if adjoint else 0)


def _edge_points(origin, hx, hy, local, t):
    """Physical points on local edge ``local`` for parameters ``t``."""
    x0, y0 = origin[:, :1], origin[:, 1:]
    t = t[None, :]
    if local == 0:
        return x0 + hx * t, y0 + 0 * t
    if local == 1:
        return x0 + hx + 0 * t, y0 + hy * t
    if local == 2:
        return x0 + hx * t, y0 + hy + 0 * t
    return x0 + 0 * t, y0 + hy * t


def assemble_element_matrices(
    mesh: MeshTopology,
    basis: ElementBasis,
    edge_basis: EdgeBasis,
    coeffs: ProblemCoefficients,
    quad: QuadratureRule,
    elements=None,
):
    """Assemble ``A_k``, ``C_k`` and load vectors for a batch of elements.

    Returns ``(A, C, F)`` with shapes ``(n, nb, nb)``, ``(n, nb, 4(q+1))`` and
    ``(n, nb)``.
    """
    p, q = basis.p, edge_basis.q
    if quad.order < p + 2:
        raise ValueError(f"quadrature order {quad.order} < p + 2 = {p + 2}")
    elements = np.arange(mesh.n_elements) if elements is None else np.atleast_1d(elements)
    ne, nb, nq = len(elements), basis.size, edge_basis.size
    hx, hy = mesh.hx, mesh.hy
    origin = mesh.element_origin(elements)

    # volume terms
    xi, eta = quad.points2d[:, 0], quad.points2d[:, 1]
    val, dxi, deta = basis.evaluate(xi, eta)
    w = quad.weights2d * hx * hy
    stiff = (np.einsum("q,qa,qb->ab", w, dxi, dxi) / hx**2
             + np.einsum("q,qa,qb->ab", w, deta, deta) / hy**2)
    px = origin[:, :1] + hx * xi[None, :]
    py = origin[:, 1:] + hy * eta[None, :]
    kap2 = coeffs.kappa(px, py) ** 2
    A = np.empty((ne, nb, nb), dtype=complex)
    A[:] = stiff
    A -= np.einsum("qa,kq,qb->kab", val, kap2 * w, val)
    F = np.einsum("qa,kq->ka", val, np.asarray(coeffs.source(px, py), dtype=complex) * w)

    # edge terms
    t, tw = quad.points, quad.weights
    lt, _ = legendre_table(p, t)
    lam = edge_basis.evaluate(t)
    pairing = np.einsum("q,qi,qm->im", tw, lt, lam)  # int L_i lambda_m
    T = basis.trace_matrices()
    leg_mass = basis.mass1d
    C = np.zeros((ne, nb, 4 * nq), dtype=complex)
    sub = mesh.element_edges[elements]
    owner_elem = np.zeros_like(sub, dtype=bool)
    has = sub >= 0
    owner_elem[has] = mesh.owner[sub[has]] == elements[np.nonzero(has)[0]]
    for e in range(4):
        length = hx if e % 2 == 0 else hy
        Te = T[e]
        interior = has[:, e]
        sign = np.where(owner_elem[:, e], 1.0, -1.0)
        robin = length * Te.T @ (leg_mass[:, None] * Te)
        idx = np.nonzero(interior)[0]
        if idx.size:
            A[idx] += (1j * coeffs.rho * sign[idx])[:, None, None] * robin
            C[idx, :, e * nq:(e + 1) * nq] = (sign[idx][:, None, None]
                                              * (length * Te.T @ pairing))
        idx = np.nonzero(~interior)[0]
        if idx.size:
            ex, ey = _edge_points(origin[idx], hx, hy, e, t)
            ev = lt @ Te  # (nq_t, nb) element basis on the edge
            kap = coeffs.kappa(ex, ey)
            A[idx] += 1j * length * np.einsum("qa,kq,qb->kab", ev, kap * tw, ev)
            nrm = LOCAL_NORMALS[e]
            g = np.asarray(coeffs.boundary(ex, ey, nrm[0], nrm[1]), dtype=complex)
            F[idx] += length * np.einsum("qa,kq->ka", ev, g * tw)
    return A, C, F


def assemble_local(
    mesh: MeshTopology,
    element: int,
    basis: ElementBasis,
    edge_basis: EdgeBasis,
    coeffs: ProblemCoefficients,
    quad: QuadratureRule | None = None,
) -> LocalOperator:
    """Assemble and LU-factorise the local problem of one element."""
    import scipy.linalg as sla

    quad = quad or quadrature(basis.p + 2)
    A, C, F = assemble_element_matrices(mesh, basis, edge_basis, coeffs, quad, [element])
    lu = sla.lu_factor(A[0], check_finite=True)
    if np.any(np.abs(np.diag(lu[0])) <= 1e-14 * np.abs(A[0]).max()):
        raise SingularLocalProblem(element)
    T = basis.trace_matrices().reshape(-1, basis.size)
    return LocalOperator(element, A[0], C[0], T, F[0], lu)


@dataclass(frozen=True, eq=False)
class LocalSolvers:
    """All element solution maps of one discretisation.

    ``G[k]`` maps the element's local edge coefficients (4 slots of ``q + 1``,
    boundary slots ignored) to element coefficients; ``B[k] = T @ G[k]`` maps
    them to trace coefficients ``(4, p + 1)`` flattened.
    """

    mesh: MeshTopology
    basis: ElementBasis
    edge_basis: EdgeBasis
    G: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    u2: np.ndarray = field(repr=False)
    trace: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.basis.p

    @property
    def q(self) -> int:
        return self.edge_basis.q

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_interior_edges * self.edge_basis.size

    def gather(self, lam) -> np.ndarray:
        """Edge vector -> per-element local edge coefficients ``(N, 4(q+1))``."""
        nq = self.edge_basis.size
        lam = np.asarray(lam).reshape(-1, nq)
        if lam.shape[0] != self.mesh.n_interior_edges:
            raise ValueError(
                f"edge vector has {lam.size} entries, expected {self.n_dofs}"
            )
        padded = np.vstack([lam, np.zeros((1, nq), dtype=lam.dtype)])
        return padded[self.mesh.element_edges].reshape(self.mesh.n_elements, -1)

    def scatter(self, local) -> np.ndarray:
        """Adjoint of :meth:`gather`: sum the two element contributions per edge."""
        nq = self.edge_basis.size
        mesh = self.mesh
        local = local.reshape(mesh.n_elements, 4, nq)
        out = local[mesh.owner, mesh.owner_local] + local[mesh.neighbor, mesh.neighbor_local]
        return out.reshape(-1)

    def traces(self, field_coeffs) -> np.ndarray:
        """Legendre coefficients of the edge traces, shape ``(N, 4, p + 1)``."""
        t = np.einsum("ab,kb->ka", self.trace, field_coeffs)
        return t.reshape(self.mesh.n_elements, 4, self.p + 1)


def build_local_solvers(
    mesh: MeshTopology,
    basis: ElementBasis,
    edge_basis: EdgeBasis,
    coeffs: ProblemCoefficients,
    quad: QuadratureRule | None = None,
    chunk: int = 2048,
) -> LocalSolvers:
    """Assemble and solve all element problems once; keep the solution maps."""
    quad = quad or quadrature(basis.p + 2)
    n = mesh.n_elements
    nb = basis.size
    ncol = 4 * edge_basis.size
    G = np.empty((n, nb, ncol), dtype=complex)
    u2 = np.empty((n, nb), dtype=complex)
    for start in range(0, n, chunk):
        sl = np.arange(start, min(start + chunk, n))
        A, C, F = assemble_element_matrices(mesh, basis, edge_basis, coeffs, quad, sl)
        rhs = np.concatenate([C, F[:, :, None]], axis=2)
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            for j, k in enumerate(sl):
                try:
                    np.linalg.solve(A[j], rhs[j])
                except np.linalg.LinAlgError:
                    raise SingularLocalProblem(int(k)) from None
            raise
        if not np.all(np.isfinite(sol)):
            bad = sl[np.nonzero(~np.isfinite(sol).all(axis=(1, 2)))[0][0]]
            raise SingularLocalProblem(int(bad))
        G[sl] = sol[:, :, :ncol]
        u2[sl] = sol[:, :, ncol]
    T = basis.trace_matrices().reshape(-1, nb)
    B = np.einsum("ab,kbc->kac", T, G)
    return LocalSolvers(mesh, basis, edge_basis, G, B, u2, T)


def solve_u2(ops: LocalSolvers) -> np.ndarray:
    """Element solutions driven by (f, g) alone, shape ``(N, n_basis)``."""
    return ops.u2.copy()


def solve_u1(ops: LocalSolvers, lam) -> np.ndarray:
    """Element solutions driven by interface data ``lam`` alone."""
    return np.einsum("kac,kc->ka", ops.G, ops.gather(lam))


def solve_u1_adjoint(ops: LocalSolvers, trace_data) -> np.ndarray:
    """Adjoint of ``lam -> traces(u1(lam))`` with the L2 edge pairing.

    ``trace_data`` has shape ``(N, 4, p + 1)`` (Legendre coefficients per
    element edge). The result ``y`` satisfies
    ``<y, mu> = sum_k sum_e int_e w_{k,e} conj(trace_e u1_k(mu))`` in the
    coefficient inner product ``<y, mu> = sum y_i conj(mu_i)``.
    """
    mesh = ops.mesh
    w = np.asarray(trace_data).reshape(mesh.n_elements, 4, ops.p + 1)
    length = mesh.edge_length(np.arange(4))
    weighted = w * (length[:, None] * ops.basis.mass1d[None, :])[None]
    local = np.einsum("kac,ka->kc", ops.B.conj(), weighted.reshape(mesh.n_elements, -1))
    return ops.scatter(local)
