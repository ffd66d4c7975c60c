"""Polynomial bases and quadrature on the unit interval and unit square.

Two families live here:

* the edge basis used for the interface unknowns: the endpoint-free Jacobi
  polynomials ``psi_k`` (vanishing at both ends, mutually orthogonal) plus two
  "linear" functions ``phi1*``, ``phi2*`` made orthogonal to them;
* the tensor-product Legendre basis used inside each rectangular element.

All 1D objects are defined on ``[0, 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import legendre as npleg

__all__ = [
    "QuadratureRule",
    "quadrature",
    "legendre_table",
    "jacobi_psi",
    "jacobi_psi_table",
    "psi_norm2",
    "EdgeBasis",
    "ElementBasis",
    "element_basis",
    "edge_gram_identities",
    "infsup_constant2",
    "infsup_test_function",
    "partial_sums",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on [0, 1] and its tensor product on [0, 1]^2.

    ``points2d`` is ordered with the x index running fastest, matching the
    element basis ordering.
    """

    order: int
    points: np.ndarray
    weights: np.ndarray
    points2d: np.ndarray = field(repr=False)
    weights2d: np.ndarray = field(repr=False)


def quadrature(order: int) -> QuadratureRule:
    """Gauss rule with ``order`` points per axis (exact to degree 2*order-1)."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    x, w = npleg.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    # index = iy * order + ix
    px = np.tile(x, order)
    py = np.repeat(x, order)
    w2 = np.repeat(w, order) * np.tile(w, order)
    return QuadratureRule(order, x, w, np.column_stack([px, py]), w2)


def legendre_table(p: int, t) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of shifted Legendre ``L_0..L_p`` at ``t`` in [0, 1].

    Returns two arrays of shape ``(len(t), p + 1)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = 2.0 * t - 1.0
    val = npleg.legvander(s, p)
    der = np.zeros_like(val)
    for i in range(1, p + 1):
        c = np.zeros(i + 1)
        c[i] = 1.0
        der[:, i] = 2.0 * npleg.legval(s, npleg.legder(c))
    return val, der


def psi_norm2(k: int) -> float:
    """Squared L2(0,1) norm of ``psi_k``: k(k+1)(k+2)(k+3)/(2k+3)."""
    return k * (k + 1) * (k + 2) * (k + 3) / (2 * k + 3)


def jacobi_psi_table(kmax: int, x, derivative: bool = False):
    """Evaluate ``psi_1..psi_kmax`` at ``x`` by the three-term recursion.

    Returns an array of shape ``(len(x), kmax)``; with ``derivative=True`` a
    pair ``(values, derivatives)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    val = np.zeros((x.size, max(kmax, 0)))
    der = np.zeros_like(val)
    if kmax >= 1:
        val[:, 0] = 12.0 * x * (1.0 - x)
        der[:, 0] = 12.0 - 24.0 * x
    if kmax >= 2:
        val[:, 1] = 120.0 * x * (1.0 - x) * (x - 0.5)
        der[:, 1] = 120.0 * (-3.0 * x * x + 3.0 * x - 0.5)
    for k in range(3, kmax + 1):
        a = 2.0 * (2 * k + 1) / (k - 1)
        b = (k + 2) / (k - 1)
        val[:, k - 1] = a * (x - 0.5) * val[:, k - 2] - b * val[:, k - 3]
        der[:, k - 1] = a * (val[:, k - 2] + (x - 0.5) * der[:, k - 2]) - b * der[:, k - 3]
    if derivative:
        return val, der
    return val


def jacobi_psi(k: int, x):
    """Value of ``psi_k`` at ``x``; a float for scalar ``x``."""
    if k < 1:
        raise ValueError("psi_k is defined for k >= 1")
    out = jacobi_psi_table(k, x)[:, k - 1]
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def _alpha(k: int) -> float:
    # <x, psi_k> / ||psi_k||^2 with <x, psi_k> = 1
    return 1.0 / psi_norm2(k)


def _beta(k: int) -> float:
    # <1-x, psi_k> = (-1)^(k-1)
    return (-1.0) ** (k - 1) / psi_norm2(k)


@dataclass(frozen=True)
class EdgeBasis:
    """Degree-``q`` basis on one edge, ordered ``[phi1*, phi2*, psi_1..psi_{q-1}]``.

    ``phi1*`` is the orthogonalised ``x`` (it carries the value at ``x = 1``),
    ``phi2*`` the orthogonalised ``1 - x``.
    """

    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("edge degree q must be >= 1")

    @property
    def size(self) -> int:
        return self.q + 1

    def evaluate(self, x, derivative: bool = False):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        q = self.q
        psi, dpsi = jacobi_psi_table(q - 1, x, derivative=True)
        phi1 = x.copy()
        phi2 = 1.0 - x
        dphi1 = np.ones_like(x)
        dphi2 = -np.ones_like(x)
        for k in range(1, q):
            phi1 = phi1 - _alpha(k) * psi[:, k - 1]
            phi2 = phi2 - _beta(k) * psi[:, k - 1]
            dphi1 = dphi1 - _alpha(k) * dpsi[:, k - 1]
            dphi2 = dphi2 - _beta(k) * dpsi[:, k - 1]
        val = np.column_stack([phi1, phi2, psi])
        if derivative:
            return val, np.column_stack([dphi1, dphi2, dpsi])
        return val

    def gram(self) -> np.ndarray:
        """Closed-form L2(0,1) Gram matrix of the basis."""
        q = self.q
        g = np.zeros((q + 1, q + 1))
        g[0, 0] = g[1, 1] = 1.0 / (q * (q + 2))
        g[0, 1] = g[1, 0] = (-1.0) ** (q - 1) / (q * (q + 1) * (q + 2))
        for k in range(1, q):
            g[k + 1, k + 1] = psi_norm2(k)
        return g


@dataclass(frozen=True)
class ElementBasis:
    """Tensor-product shifted-Legendre basis of per-axis degree ``p``.

    Function ``b = j * (p + 1) + i`` is ``L_i(xi) * L_j(eta)``. Local edges are
    numbered 0 bottom, 1 right, 2 top, 3 left; each edge is parametrised by the
    increasing global coordinate along it.
    """

    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("element degree p must be >= 1")

    @property
    def size(self) -> int:
        return (self.p + 1) ** 2

    @property
    def mass1d(self) -> np.ndarray:
        return 1.0 / (2.0 * np.arange(self.p + 1) + 1.0)

    def evaluate(self, xi, eta):
        """Values and reference gradients at points; shapes ``(n, size)``."""
        lx, dlx = legendre_table(self.p, xi)
        ly, dly = legendre_table(self.p, eta)
        val = np.einsum("nj,ni->nji", ly, lx).reshape(len(lx), -1)
        dxi = np.einsum("nj,ni->nji", ly, dlx).reshape(len(lx), -1)
        deta = np.einsum("nj,ni->nji", dly, lx).reshape(len(lx), -1)
        return val, dxi, deta

    def trace_matrix(self, edge: int) -> np.ndarray:
        """Map element coefficients to the 1D Legendre coefficients of the trace."""
        p1 = self.p + 1
        end0 = (-1.0) ** np.arange(p1)  # L_j(0)
        end1 = np.ones(p1)  # L_j(1)
        eye = np.eye(p1)
        # rows: 1D index along the edge; columns: b = j * p1 + i
        if edge == 0:
            t = np.einsum("j,ki->kji", end0, eye)
        elif edge == 2:
            t = np.einsum("j,ki->kji", end1, eye)
        elif edge == 1:
            t = np.einsum("kj,i->kji", eye, end1)
        elif edge == 3:
            t = np.einsum("kj,i->kji", eye, end0)
        else:
            raise ValueError(f"bad local edge {edge}")
        return t.reshape(p1, p1 * p1)

    def trace_matrices(self) -> np.ndarray:
        """All four trace maps stacked, shape ``(4, p + 1, size)``."""
        return np.stack([self.trace_matrix(e) for e in range(4)])

    def reference_matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """1D mass, 1D stiffness on [0,1] and the 2D reference mass (diagonal)."""
        p1 = self.p + 1
        rule = quadrature(p1 + 1)
        l, dl = legendre_table(self.p, rule.points)
        m1 = np.einsum("q,qi,qj->ij", rule.weights, l, l)
        k1 = np.einsum("q,qi,qj->ij", rule.weights, dl, dl)
        return m1, k1, np.kron(m1, m1)


def element_basis(p: int) -> ElementBasis:
    return ElementBasis(p)


def edge_gram_identities(q: int, kmax: int | None = None, quad_order: int | None = None) -> dict:
    """Check the closed-form inner products of the edge basis by quadrature.

    Returns a dict of ``name -> (computed, closed_form)`` pairs covering the
    pairings of ``x`` and ``1 - x`` with ``psi_k``, the norms of ``psi_k``, and
    the Gram entries of ``phi1*``/``phi2*``.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    kmax = max(q - 1, 1) if kmax is None else kmax
    rule = quadrature(quad_order or (kmax + 4))
    x, w = rule.points, rule.weights
    psi = jacobi_psi_table(kmax, x)
    out: dict = {}
    for k in range(1, kmax + 1):
        pk = psi[:, k - 1]
        out[f"<phi1,psi_{k}>"] = (float(w @ (x * pk)), 1.0)
        out[f"<phi2,psi_{k}>"] = (float(w @ ((1 - x) * pk)), (-1.0) ** (k - 1))
        out[f"||psi_{k}||^2"] = (float(w @ (pk * pk)), psi_norm2(k))
    eb = EdgeBasis(q)
    val = eb.evaluate(x)
    g = np.einsum("q,qi,qj->ij", w, val, val)
    out["<phi1*,phi1*>"] = (float(g[0, 0]), 1.0 / (q * (q + 2)))
    out["<phi2*,phi2*>"] = (float(g[1, 1]), 1.0 / (q * (q + 2)))
    out["<phi1*,phi2*>"] = (float(g[0, 1]), (-1.0) ** (q - 1) / (q * (q + 1) * (q + 2)))
    return out


def partial_sums(m: int) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
    """Exact rational partial sums behind the phi* Gram values.

    Returns ``((lhs1, rhs1), (lhs2, rhs2))`` for the plain and alternating sums
    of (2k+3)/(k(k+1)(k+2)(k+3)), k = 1..m.
    """
    s1 = sum(Fraction(2 * k + 3, k * (k + 1) * (k + 2) * (k + 3)) for k in range(1, m + 1))
    s2 = sum(
        Fraction((-1) ** (k - 1) * (2 * k + 3), k * (k + 1) * (k + 2) * (k + 3))
        for k in range(1, m + 1)
    )
    r1 = Fraction(1, 3) - Fraction(1, (m + 1) * (m + 3))
    r2 = Fraction(1, 6) + Fraction((-1) ** (m - 1), (m + 1) * (m + 2) * (m + 3))
    return (s1, r1), (s2, r2)


def infsup_constant2(q: int, p: int) -> float:
    """Lower bound C_{p,q}^2 for ||v||^2 / ||mu||^2 of the test-function construction."""
    if p < q + 2:
        raise ValueError("need p >= q + 2")
    if (p + q) % 2 == 0:
        return 1.0 - (q + 1) * (q + 2) / ((p + 1) * (p + 2))
    return 1.0 - (q + 1) * (q + 2) / (p * (p + 1))


def infsup_test_function(mu, q: int, p: int) -> np.ndarray:
    """Endpoint-free test function paired with an edge function ``mu``.

    ``mu`` holds coefficients in :class:`EdgeBasis` order. The result holds the
    coefficients of ``v`` in ``psi_1..psi_{p-1}``: the psi part of ``mu`` is
    kept and the ``phi*`` part is replaced by its orthogonal projection onto
    ``span{psi_q..psi_{p-1}}``.
    """
    if p < q + 2:
        raise ValueError("need p >= q + 2")
    mu = np.asarray(mu)
    if mu.shape[-1] != q + 1:
        raise ValueError(f"expected {q + 1} coefficients, got {mu.shape[-1]}")
    a1, a2 = mu[..., 0], mu[..., 1]
    v = np.zeros(mu.shape[:-1] + (p - 1,), dtype=mu.dtype)
    v[..., : q - 1] = mu[..., 2:]
    for k in range(q, p):
        # <phi_i*, psi_k> equals <phi_i, psi_k> for k >= q
        v[..., k - 1] = (a1 + (-1.0) ** (k - 1) * a2) / psi_norm2(k)
    return v
