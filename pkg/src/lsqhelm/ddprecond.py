"""Substructuring preconditioner for the interface system.

Edge dofs split into *interior* dofs ``I`` (edges with both elements in one
``D_r^0``) and interface dofs ``Gamma`` (edges touching the boundary layer
of some subdomain). Every subspace operator is a principal submatrix of the
assembled ``S``:

* ``S_r^0``  on the interior dofs of ``D_r^0``;
* ``A_rl``   on the dofs of the band around coarse edge ``Gamma_rl``;
* ``S_d = Phi^H S Phi`` on the span of the coarse basis.

One application computes ``lam0 = P_I xi`` with the block-diagonal interior
solve ``P_I``, forms the residual ``r = xi - S lam0``, corrects on the bands
and the coarse space, keeps the ``Gamma`` part of the correction and extends
it harmonically into the subdomain interiors. The result is

    K^{-1} = P_I + (I - P_I S) R_G^T R_G M R_G^T R_G (I - S P_I),

which is Hermitian positive definite whenever ``M`` (band plus coarse
solves) is positive definite on ``Gamma``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .interface import InterfaceSystem
from .mesh import DecompositionLayout

__all__ = [
    "SubspaceSolver",
    "CoarseSpace",
    "SubstructuringPreconditioner",
    "build_local_solvers",
    "build_coarse_space",
    "build_preconditioner",
    "apply_preconditioner",
    "edge_dofs",
]

log = logging.getLogger(__name__)

# beyond this size a subspace block is factorised sparsely
DENSE_LIMIT = 3000


def edge_dofs(edges: np.ndarray, nq: int) -> np.ndarray:
    """Global dof indices of a set of interior edges."""
    edges = np.asarray(edges, dtype=np.int64)
    return (edges[:, None] * nq + np.arange(nq)[None, :]).ravel()


@dataclass(eq=False)
class SubspaceSolver:
    """Exact solver for ``S`` restricted to the dof set ``dofs``."""

    name: str
    dofs: np.ndarray
    matrix: np.ndarray | sp.spmatrix = field(repr=False)
    _factor: object = field(default=None, repr=False)
    subdomain: int = -1

    @classmethod
    def from_matrix(cls, name: str, S: sp.csr_matrix, dofs: np.ndarray,
                    subdomain: int = -1) -> "SubspaceSolver":
        if len(dofs) == 0:
            raise ValueError(f"subspace {name} has no dofs")
        block = S[dofs][:, dofs]
        if len(dofs) <= DENSE_LIMIT:
            dense = block.toarray()
            try:
                factor = sla.cho_factor(dense, lower=False, check_finite=True)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(
                    f"subspace {name} ({len(dofs)} dofs) is not positive definite"
                ) from exc
            return cls(name, dofs, dense, ("dense", factor), subdomain)
        lu = splu(block.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
        return cls(name, dofs, block, ("sparse", lu), subdomain)

    @property
    def size(self) -> int:
        return len(self.dofs)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        kind, fac = self._factor
        if kind == "dense":
            return sla.cho_solve(fac, rhs, check_finite=False)
        if rhs.ndim == 2:
            return np.column_stack([fac.solve(np.ascontiguousarray(c)) for c in rhs.T])
        return fac.solve(rhs)


@dataclass(eq=False)
class CoarseSpace:
    """Coarse basis ``Phi`` (sparse, one column per vertex dof) and ``S_d``."""

    basis: sp.csc_matrix = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    vertex_columns: list = field(repr=False)
    _factor: tuple | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.basis.shape[1]

    def solve(self, r: np.ndarray) -> np.ndarray:
        if self.size == 0:
            return np.zeros_like(r)
        y = self.basis.conj().T @ r
        return self.basis @ sla.cho_solve(self._factor, y, check_finite=False)


def build_local_solvers(layout: DecompositionLayout, sys_: InterfaceSystem):
    """Interior solvers (one per ``D_r^0``) and band solvers (one per coarse edge).

    Returns ``(interior, bands)``.
    """
    S = sys_.assemble()
    nq = sys_.ops.edge_basis.size
    interior = []
    for r, elems in enumerate(layout.interior):
        if len(elems) == 0:
            raise ValueError(f"subdomain {r} has an empty interior")
        edges = layout.edges_inside(elems)
        if len(edges):
            interior.append(SubspaceSolver.from_matrix(f"D{r}^0", S, edge_dofs(edges, nq), r))
    bands = []
    for i, ce in enumerate(layout.coarse_edges):
        edges = layout.edges_inside(ce.band)
        bands.append(SubspaceSolver.from_matrix(f"band{i}({ce.r},{ce.l})", S,
                                                edge_dofs(edges, nq)))
    return interior, bands


def _apply_interior(interior, x: np.ndarray) -> np.ndarray:
    """``P_I x``: block-diagonal interior solves, zero on Gamma."""
    out = np.zeros(x.shape, dtype=complex)
    for s in interior:
        out[s.dofs] = s.solve(x[s.dofs])
    return out


def _touched(interior, layout: DecompositionLayout, edges: np.ndarray):
    """Interior solvers of the subdomains adjacent to ``edges``."""
    mesh = layout.mesh
    subs = np.unique(np.concatenate([layout.subdomain_of[mesh.owner[edges]],
                                     layout.subdomain_of[mesh.neighbor[edges]]]))
    return [s for s in interior if s.subdomain in subs]


def build_coarse_space(layout: DecompositionLayout, sys_: InterfaceSystem, solvers) -> CoarseSpace:
    """Energy-minimising coarse basis attached to the interior coarse vertices.

    For every dof ``e`` on the edges of the vertex element ``D_V``:
    ``phi = e - P_I S e`` (harmonic in the subdomain interiors), then on each
    band of the four coarse edges meeting at ``V`` the energy is minimised,
    ``Phi = phi - sum_rl A_rl^{-1} (S phi)|_band``.
    """
    interior, bands = solvers
    S = sys_.assemble()
    n = sys_.dim
    nq = sys_.ops.edge_basis.size
    mesh = layout.mesh
    cols, vertex_columns = [], []
    start = 0
    for v, elem in enumerate(layout.vertex_element):
        edges = mesh.element_edges[elem]
        edges = edges[edges >= 0]
        dofs = edge_dofs(edges, nq)
        E = sp.csc_matrix((np.ones(len(dofs)), (dofs, np.arange(len(dofs)))),
                          shape=(n, len(dofs)), dtype=complex)
        SE = S @ E
        phi = E.toarray()
        for s in _touched(interior, layout, np.unique(SE.nonzero()[0]) // nq):
            phi[s.dofs] -= s.solve(SE[s.dofs].toarray())
        Phi = phi.copy()
        for ce in layout.vertex_edges[v]:
            b = bands[ce]
            Phi[b.dofs] -= b.solve(S[b.dofs] @ phi)
        Phi[np.abs(Phi) < 1e-300] = 0.0
        cols.append(sp.csc_matrix(Phi))
        vertex_columns.append(np.arange(start, start + len(dofs)))
        start += len(dofs)
    if not cols:
        return CoarseSpace(sp.csc_matrix((n, 0), dtype=complex), np.zeros((0, 0), complex), [])
    basis = sp.hstack(cols).tocsc()
    Sd = (basis.conj().T @ (S @ basis)).toarray()
    Sd = 0.5 * (Sd + Sd.conj().T)
    try:
        factor = sla.cho_factor(Sd)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"coarse matrix ({Sd.shape[0]} columns, m={layout.m}) is not positive definite"
        ) from exc
    return CoarseSpace(basis, Sd, vertex_columns, factor)


@dataclass(eq=False)
class SubstructuringPreconditioner:
    """``K^{-1}`` as a callable on edge vectors."""

    layout: DecompositionLayout
    system: InterfaceSystem
    interior: list = field(repr=False)
    bands: list = field(repr=False)
    coarse: CoarseSpace = field(repr=False)
    gamma: np.ndarray = field(repr=False)  # boolean mask of interface dofs
    setup_time: float = 0.0

    def __post_init__(self):
        self._S = self.system.assemble()

    @property
    def n_gamma(self) -> int:
        return int(self.gamma.sum())

    def apply(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=complex)
        if xi.shape != (self.system.dim,):
            raise ValueError(f"expected a vector of length {self.system.dim}")
        S = self._S
        lam0 = _apply_interior(self.interior, xi)
        r = xi - S @ lam0
        r[~self.gamma] = 0.0
        phi = self.coarse.solve(r)
        for b in self.bands:
            phi[b.dofs] += b.solve(r[b.dofs])
        phi[~self.gamma] = 0.0
        return lam0 + phi - _apply_interior(self.interior, S @ phi)

    __call__ = apply


def build_preconditioner(layout: DecompositionLayout, sys_: InterfaceSystem) -> SubstructuringPreconditioner:
    t0 = time.perf_counter()
    interior, bands = build_local_solvers(layout, sys_)
    coarse = build_coarse_space(layout, sys_, (interior, bands))
    gamma = np.ones(sys_.dim, dtype=bool)
    for s in interior:
        gamma[s.dofs] = False
    covered = np.zeros(sys_.dim, dtype=bool)
    for b in bands:
        covered[b.dofs] = True
    if coarse.size:
        covered[np.unique(coarse.basis.nonzero()[0])] = True
    if np.any(gamma & ~covered):
        raise ValueError(f"{int(np.sum(gamma & ~covered))} interface dofs have no subspace")
    K = SubstructuringPreconditioner(layout, sys_, interior, bands, coarse, gamma,
                                     time.perf_counter() - t0)
    log.info("preconditioner: %d interior blocks, %d bands, %d coarse columns, %.1fs",
             len(interior), len(bands), coarse.size, K.setup_time)
    return K


def apply_preconditioner(K: SubstructuringPreconditioner, xi) -> np.ndarray:
    return K.apply(xi)
