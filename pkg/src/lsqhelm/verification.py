"""Self-checks shared by the ``verify`` command and the test suite.

Each check returns a list of :class:`CheckResult`; nothing here raises on a
failed comparison.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import (
    EdgeBasis,
    edge_gram_identities,
    element_basis,
    infsup_constant2,
    infsup_test_function,
    jacobi_psi_table,
    quadrature,
)
from .interface import InterfaceSystem, cg_solve, direct_solve, recover_solution
from .local import build_local_solvers
from .mesh import build_mesh
from .problems import make_manufactured, relative_l2_error

__all__ = [
    "CheckResult",
    "check_jacobi_identities",
    "check_dense_oracle",
    "check_polynomial_exactness",
    "check_infsup",
    "run_all",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


def check_jacobi_identities(qmax: int = 6, kmax: int = 10, tol: float = 1e-12) -> list[CheckResult]:
    """Worst relative error of every closed-form edge-basis inner product."""
    out = []
    for q in range(1, qmax + 1):
        ids = edge_gram_identities(q, kmax=kmax)
        worst = max(abs(c - e) / abs(e) for c, e in ids.values())
        out.append(CheckResult(f"edge basis identities q={q} k<={kmax}", worst, tol, worst <= tol))
    return out


def interface_system(problem, nx: int, ny: int, q: int, p: int, quad_order: int | None = None):
    mesh = build_mesh(problem.domain, nx, ny)
    quad = quadrature(quad_order or p + 3)
    ops = build_local_solvers(mesh, element_basis(p), EdgeBasis(q), problem.coeffs, quad)
    return InterfaceSystem.from_solvers(ops)


def pointwise_dense_S(sys_: InterfaceSystem, n_points: int | None = None) -> np.ndarray:
    """Dense ``S`` from point values of local solutions on every interior edge.

    Independent of the Legendre trace maps and the edge mass: the jump of
    ``u1(e_j)`` is evaluated at Gauss points on each edge directly from the
    element basis and integrated there.
    """
    ops = sys_.ops
    mesh = ops.mesh
    basis = ops.basis
    rule = quadrature(n_points or ops.p + 2)
    t, w = rule.points, rule.weights
    # element basis on each local edge, parametrised by increasing coordinate
    ref = {0: (t, 0 * t), 1: (1 + 0 * t, t), 2: (t, 1 + 0 * t), 3: (0 * t, t)}
    ev = {e: basis.evaluate(*ref[e])[0] for e in range(4)}
    length = mesh.edge_length(mesh.owner_local)
    n = sys_.dim
    cols = np.zeros((mesh.n_interior_edges * len(t), n), dtype=complex)
    wq = np.sqrt((length[:, None] * w[None, :]).ravel())
    for j in range(n):
        lam = np.zeros(n)
        lam[j] = 1.0
        u = np.einsum("kac,kc->ka", ops.G, ops.gather(lam))
        vals = np.stack([u @ ev[e].T for e in range(4)], axis=1)  # (N, 4, nt)
        jump = vals[mesh.owner, mesh.owner_local] - vals[mesh.neighbor, mesh.neighbor_local]
        cols[:, j] = jump.ravel() * wq
    return cols.conj().T @ cols


def check_dense_oracle(cases=((1, 3), (2, 4)), sizes=((1, 2), (2, 2), (3, 2), (3, 3)),
                       tol: float = 1e-11, herm_tol: float = 1e-12) -> list[CheckResult]:
    """Matrix-free ``S`` against the point-evaluated dense oracle."""
    out = []
    for q, p in cases:
        for nx, ny in sizes:
            prob = make_manufactured(2.0, q, seed=nx * 10 + ny)
            sys_ = interface_system(prob, nx, ny, q, p)
            dense = pointwise_dense_S(sys_)
            cols = np.column_stack([sys_.matvec(e) for e in np.eye(sys_.dim)])
            scale = np.abs(dense).max()
            err = np.abs(cols - dense).max() / scale
            herm = np.linalg.norm(cols - cols.conj().T) / np.linalg.norm(cols)
            tag = f"(q,p)=({q},{p}) {nx}x{ny}"
            out.append(CheckResult(f"matrix-free S vs dense oracle {tag}", err, tol, err <= tol))
            out.append(CheckResult(f"S Hermitian {tag}", herm, herm_tol, herm <= herm_tol))
    return out


def check_polynomial_exactness(q: int = 2, p: int = 4, sizes=(4, 8), omega: float = 3.0,
                               tol: float = 1e-8) -> list[CheckResult]:
    """Polynomials of per-axis degree q are reproduced (direct and CG solves)."""
    out = []
    prob = make_manufactured(omega, q, seed=7)
    for n in sizes:
        sys_ = interface_system(prob, n, n, q, p)
        ops = sys_.ops
        for label in ("direct", "cg"):
            if label == "direct":
                lam, _ = direct_solve(sys_)
            else:
                lam, _ = cg_solve(sys_, sys_.rhs, tol=1e-13, max_iter=50 * sys_.dim)
            err = relative_l2_error(recover_solution(ops, lam), prob, ops.mesh, ops.basis)
            out.append(CheckResult(f"polynomial exactness {n}x{n} (q,p)=({q},{p}) {label}",
                                   err, tol, err <= tol))
    return out


def infsup_ratios(q: int, p: int, n_samples: int = 1000, seed: int = 0) -> np.ndarray:
    """``<mu, v> / (||mu|| ||v||) - C_{p,q}`` for random complex ``mu``."""
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal((n_samples, q + 1)) + 1j * rng.standard_normal((n_samples, q + 1))
    v = infsup_test_function(mu, q, p)
    rule = quadrature(p + 2)
    x, w = rule.points, rule.weights
    mu_x = mu @ EdgeBasis(q).evaluate(x).T
    v_x = v @ jacobi_psi_table(p - 1, x).T
    pair = (mu_x * v_x.conj()) @ w
    nm = np.sqrt((np.abs(mu_x) ** 2) @ w)
    nv = np.sqrt((np.abs(v_x) ** 2) @ w)
    if np.max(np.abs(pair.imag) / (nm * nv)) > 1e-12:
        raise ArithmeticError("<mu, v> is not real")
    return pair.real / (nm * nv) - np.sqrt(infsup_constant2(q, p))


def check_infsup(cases=((1, 3), (2, 4), (3, 5)), n_samples: int = 1000,
                 slack: float = 1e-12) -> list[CheckResult]:
    out = []
    for q, p in cases:
        worst = float(np.min(infsup_ratios(q, p, n_samples)))
        out.append(CheckResult(f"inf-sup test function (q,p)=({q},{p}) min margin",
                               worst, -slack, worst >= -slack))
    return out


def run_all() -> list[CheckResult]:
    return (check_jacobi_identities() + check_dense_oracle()
            + check_polynomial_exactness() + check_infsup())
