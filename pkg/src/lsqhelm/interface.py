"""The Hermitian positive definite interface system and its CG solution.

``S`` is never formed in the solve path: one application runs the forward
element sweep (edge data -> element traces), takes jumps across every
interior edge, weights them by the edge mass, and runs the adjoint sweep.
:func:`jump_operator` builds the same map as a sparse matrix for setup work
(subspace matrices of the preconditioner, direct solves, test oracles).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .local import LocalSolvers, solve_u1

__all__ = [
    "InterfaceSystem",
    "SolveReport",
    "CGBreakdown",
    "apply_S",
    "build_rhs",
    "cg_solve",
    "direct_solve",
    "recover_solution",
    "jump_functional",
]

log = logging.getLogger(__name__)


class CGBreakdown(ArithmeticError):
    """Non-positive or non-real curvature met during CG."""


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    preconditioned: bool
    wall_time: float
    history: list = field(default_factory=list, repr=False)


@dataclass(eq=False)
class InterfaceSystem:
    ops: LocalSolvers
    rhs: np.ndarray | None = None
    _jump: sp.csr_matrix | None = field(default=None, repr=False)
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)

    @classmethod
    def from_solvers(cls, ops: LocalSolvers) -> "InterfaceSystem":
        sys_ = cls(ops)
        sys_.rhs = build_rhs(sys_, ops.u2)
        return sys_

    @property
    def mesh(self):
        return self.ops.mesh

    @property
    def dim(self) -> int:
        return self.ops.n_dofs

    @property
    def edge_weights(self) -> np.ndarray:
        """Diagonal of the edge mass in the Legendre trace basis, per interior edge."""
        mesh = self.mesh
        length = mesh.edge_length(mesh.owner_local)
        return length[:, None] * self.ops.basis.mass1d[None, :]

    def jumps_of_traces(self, tr: np.ndarray) -> np.ndarray:
        """Owner-minus-neighbour trace jumps, ``(n_edges, p + 1)``."""
        mesh = self.mesh
        return tr[mesh.owner, mesh.owner_local] - tr[mesh.neighbor, mesh.neighbor_local]

    def _adjoint_of_jumps(self, wj: np.ndarray) -> np.ndarray:
        ops, mesh = self.ops, self.mesh
        z = np.zeros((mesh.n_elements, 4, ops.p + 1), dtype=complex)
        z[mesh.owner, mesh.owner_local] = wj
        z[mesh.neighbor, mesh.neighbor_local] = -wj
        local = np.einsum("kac,ka->kc", ops.B.conj(), z.reshape(mesh.n_elements, -1))
        return ops.scatter(local)

    def matvec(self, lam) -> np.ndarray:
        ops = self.ops
        tr = np.einsum("kac,kc->ka", ops.B, ops.gather(lam))
        tr = tr.reshape(self.mesh.n_elements, 4, ops.p + 1)
        return self._adjoint_of_jumps(self.edge_weights * self.jumps_of_traces(tr))

    __call__ = matvec

    def jump_operator(self) -> sp.csr_matrix:
        """Sparse map from edge coefficients to jump coefficients (rows edge-major)."""
        if self._jump is None:
            self._jump = _assemble_jump(self.ops)
        return self._jump

    def assemble(self) -> sp.csr_matrix:
        """Sparse ``S = J^H W J``; used for setup and oracles, not inside CG."""
        if self._matrix is None:
            J = self.jump_operator()
            w = self.edge_weights.reshape(-1)
            S = (J.conj().T @ sp.diags(w) @ J).tocsr()
            S = 0.5 * (S + S.conj().T)
            S.sum_duplicates()
            self._matrix = S.tocsr()
        return self._matrix

    def energy(self, lam) -> float:
        """``s_h(lam, lam)`` accumulated directly as a sum of jump norms."""
        ops = self.ops
        u1 = solve_u1(ops, lam)
        j = self.jumps_of_traces(ops.traces(u1))
        return float(np.sum(self.edge_weights * np.abs(j) ** 2))


def _assemble_jump(ops: LocalSolvers) -> sp.csr_matrix:
    mesh = ops.mesh
    nq, p1 = ops.edge_basis.size, ops.p + 1
    ne = mesh.n_interior_edges
    B = ops.B.reshape(mesh.n_elements, 4, p1, 4, nq)
    rows, cols, vals = [], [], []
    row_base = (np.arange(ne) * p1)[:, None, None]
    r_idx = row_base + np.arange(p1)[None, :, None]
    for elem, loc, sign in ((mesh.owner, mesh.owner_local, 1.0),
                            (mesh.neighbor, mesh.neighbor_local, -1.0)):
        blk = B[elem, loc]  # (ne, p1, 4, nq)
        slots = mesh.element_edges[elem]  # (ne, 4)
        for s in range(4):
            edge = slots[:, s]
            ok = edge >= 0
            c = edge[ok][:, None, None] * nq + np.arange(nq)[None, None, :]
            v = sign * blk[ok, :, s, :]
            rr = np.broadcast_to(r_idx[ok], v.shape)
            cc = np.broadcast_to(c, v.shape)
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(v.ravel())
    J = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ne * p1, ne * nq),
    )
    return J.tocsr()


def apply_S(sys_: InterfaceSystem, lam) -> np.ndarray:
    return sys_.matvec(lam)


def build_rhs(sys_: InterfaceSystem, u2: np.ndarray) -> np.ndarray:
    """Right-hand side ``b`` with ``<b, mu> = l_h(mu)``."""
    ops = sys_.ops
    j = sys_.jumps_of_traces(ops.traces(u2))
    return sys_._adjoint_of_jumps(-sys_.edge_weights * j)


def jump_functional(sys_: InterfaceSystem, lam) -> float:
    """Squared L2 norm of all trace jumps of ``u1(lam) + u2``."""
    ops = sys_.ops
    u = solve_u1(ops, lam) + ops.u2
    j = sys_.jumps_of_traces(ops.traces(u))
    return float(np.sum(sys_.edge_weights * np.abs(j) ** 2))


def recover_solution(ops: LocalSolvers, lam, u2=None) -> np.ndarray:
    """Element coefficients of ``u_h = u1(lam) + u2``."""
    return solve_u1(ops, lam) + (ops.u2 if u2 is None else u2)


def cg_solve(
    A: Callable,
    b: np.ndarray,
    precond: Callable | None = None,
    tol: float = 1e-6,
    max_iter: int = 10000,
    x0: np.ndarray | None = None,
    breakdown_tol: float = 1e-13,
) -> tuple[np.ndarray, SolveReport]:
    """(Preconditioned) conjugate gradients for a Hermitian positive definite ``A``.

    Stops when ``||b - A x|| <= tol * ||b||`` (Euclidean coefficient norm).
    Inner products are ``<x, y> = sum conj(y_i) x_i``.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=complex)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=complex)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True, precond is not None, 0.0)
    r = b - A(x) if x0 is not None else b.copy()
    z = precond(r) if precond is not None else r
    pvec = z.copy()
    rz = np.vdot(r, z)
    history = [np.linalg.norm(r) / bnorm]
    it = 0
    converged = history[-1] <= tol
    while not converged and it < max_iter:
        Ap = A(pvec)
        curv = np.vdot(pvec, Ap)
        scale = np.linalg.norm(pvec) * np.linalg.norm(Ap)
        if curv.real <= breakdown_tol * scale or abs(curv.imag) > 1e-8 * max(abs(curv), scale):
            raise CGBreakdown(f"curvature {curv} at iteration {it}")
        alpha = rz / curv.real
        x += alpha * pvec
        r -= alpha * Ap
        it += 1
        history.append(np.linalg.norm(r) / bnorm)
        if history[-1] <= tol:
            converged = True
            break
        z = precond(r) if precond is not None else r
        rz_new = np.vdot(r, z)
        if precond is not None and rz_new.real <= 0:
            raise CGBreakdown(f"preconditioner not positive at iteration {it}")
        pvec = z + (rz_new / rz) * pvec
        rz = rz_new
    report = SolveReport(it, history[-1], converged, precond is not None,
                         time.perf_counter() - t0, history)
    if not converged:
        log.warning("CG stopped after %d iterations at residual %.3e", it, history[-1])
    return x, report


def direct_solve(sys_: InterfaceSystem, b: np.ndarray | None = None):
    """Sparse LU solve of the assembled system (the 'exact' reference solve).

    ``S`` is Hermitian positive definite, so a symmetric ordering without
    pivoting is tried first; it needs about half the fill of column ordering.
    """
    from scipy.sparse.linalg import splu

    t0 = time.perf_counter()
    b = sys_.rhs if b is None else b
    S = sys_.assemble().tocsc()
    bnorm = max(np.linalg.norm(b), 1e-300)
    try:
        lu = splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
        x = lu.solve(b)
        res = np.linalg.norm(b - sys_.matvec(x)) / bnorm
        if not np.isfinite(res) or res > 1e-8:
            raise RuntimeError(f"unpivoted residual {res:.2e}")
    except RuntimeError as exc:
        log.info("symmetric LU rejected (%s); retrying with pivoting", exc)
        x = splu(S, permc_spec="COLAMD").solve(b)
        res = np.linalg.norm(b - sys_.matvec(x)) / bnorm
    return x, SolveReport(0, float(res), True, False, time.perf_counter() - t0)
