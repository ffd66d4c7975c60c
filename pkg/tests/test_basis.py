from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_jacobi, eval_legendre

from lsqhelm.basis import (
    EdgeBasis,
    ElementBasis,
    edge_gram_identities,
    infsup_constant2,
    infsup_test_function,
    jacobi_psi,
    jacobi_psi_table,
    legendre_table,
    partial_sums,
    psi_norm2,
    quadrature,
)
from lsqhelm.verification import infsup_ratios


@pytest.mark.parametrize("order", [1, 2, 5, 9])
def test_quadrature_exact_for_degree_2n_minus_1(order):
    rule = quadrature(order)
    for deg in range(2 * order):
        assert rule.weights @ rule.points**deg == pytest.approx(1.0 / (deg + 1), rel=1e-13)
    assert rule.weights2d.sum() == pytest.approx(1.0)
    # x index runs fastest
    assert np.allclose(rule.points2d[:order, 1], rule.points[0])


def test_quadrature_rejects_zero_order():
    with pytest.raises(ValueError):
        quadrature(0)


def test_legendre_table_matches_scipy():
    t = np.linspace(0, 1, 11)
    val, der = legendre_table(6, t)
    for i in range(7):
        assert np.allclose(val[:, i], eval_legendre(i, 2 * t - 1))
    h = 1e-6
    fd = (legendre_table(6, t + h)[0] - legendre_table(6, t - h)[0]) / (2 * h)
    assert np.allclose(der, fd, atol=1e-6)


def test_psi_closed_forms():
    x = np.array([0.1, 0.37, 0.8])
    assert np.allclose(jacobi_psi(1, x), 12 * x * (1 - x))
    assert np.allclose(jacobi_psi(2, x), 120 * x * (1 - x) * (x - 0.5))
    assert isinstance(jacobi_psi(3, 0.5), float)
    with pytest.raises(ValueError):
        jacobi_psi(0, 0.3)


@pytest.mark.parametrize("k", range(1, 11))
def test_psi_is_scaled_jacobi_22(k):
    # shape from an independent Jacobi evaluation, scale fixed by <x, psi_k> = 1
    rule = quadrature(k + 3)
    x = rule.points
    shape = x * (1 - x) * eval_jacobi(k - 1, 2, 2, 2 * x - 1)
    scale = 1.0 / (rule.weights @ (x * shape))
    assert np.allclose(jacobi_psi_table(k, x)[:, k - 1], scale * shape, rtol=1e-12, atol=1e-12)


def test_psi_derivative_matches_finite_difference():
    x = np.linspace(0.05, 0.95, 7)
    _, der = jacobi_psi_table(8, x, derivative=True)
    h = 1e-6
    fd = (jacobi_psi_table(8, x + h) - jacobi_psi_table(8, x - h)) / (2 * h)
    assert np.allclose(der, fd, rtol=1e-6, atol=1e-4)


def test_psi_vanish_at_endpoints_and_are_orthogonal():
    rule = quadrature(14)
    psi = jacobi_psi_table(10, rule.points)
    g = np.einsum("q,qi,qj->ij", rule.weights, psi, psi)
    norms = np.array([psi_norm2(k) for k in range(1, 11)])
    assert np.allclose(g, np.diag(norms), rtol=1e-12, atol=1e-10 * norms.max())
    assert np.allclose(jacobi_psi_table(10, [0.0, 1.0]), 0.0)


@pytest.mark.parametrize("q", range(1, 7))
def test_edge_gram_identities_within_1e12(q):
    for name, (computed, exact) in edge_gram_identities(q, kmax=10).items():
        assert abs(computed - exact) <= 1e-12 * abs(exact), name


@pytest.mark.parametrize("q", range(1, 7))
def test_edge_gram_matrix_matches_quadrature(q):
    rule = quadrature(q + 3)
    val = EdgeBasis(q).evaluate(rule.points)
    g = np.einsum("q,qi,qj->ij", rule.weights, val, val)
    exact = EdgeBasis(q).gram()
    assert np.abs(g - exact).max() <= 1e-12 * np.abs(exact).max()


def test_phi_star_endpoint_values():
    # phi1* keeps the value 1 at x = 1, phi2* at x = 0
    for q in range(1, 7):
        v = EdgeBasis(q).evaluate([0.0, 1.0])
        assert v[1, 0] == pytest.approx(1.0)
        assert v[0, 1] == pytest.approx(1.0)


@pytest.mark.parametrize("m", [1, 2, 5, 12])
def test_partial_sums_exact(m):
    (s1, r1), (s2, r2) = partial_sums(m)
    assert isinstance(s1, Fraction)
    assert s1 == r1
    assert s2 == r2


def test_element_basis_trace_matches_evaluation():
    eb = ElementBasis(4)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(eb.size)
    t = np.linspace(0, 1, 9)
    pts = {0: (t, 0 * t), 1: (1 + 0 * t, t), 2: (t, 1 + 0 * t), 3: (0 * t, t)}
    lt, _ = legendre_table(4, t)
    for e in range(4):
        direct = eb.evaluate(*pts[e])[0] @ c
        assert np.allclose(lt @ (eb.trace_matrix(e) @ c), direct)
    with pytest.raises(ValueError):
        eb.trace_matrix(4)


def test_element_basis_gradient_matches_finite_difference():
    eb = ElementBasis(3)
    xi, eta = np.array([0.2, 0.7]), np.array([0.4, 0.9])
    _, dxi, deta = eb.evaluate(xi, eta)
    h = 1e-6
    assert np.allclose(dxi, (eb.evaluate(xi + h, eta)[0] - eb.evaluate(xi - h, eta)[0]) / (2 * h),
                       atol=1e-6)
    assert np.allclose(deta, (eb.evaluate(xi, eta + h)[0] - eb.evaluate(xi, eta - h)[0]) / (2 * h),
                       atol=1e-6)


def test_reference_mass_is_diagonal():
    m1, _, m2 = ElementBasis(5).reference_matrices()
    assert np.allclose(m1, np.diag(ElementBasis(5).mass1d))
    assert np.allclose(m2, np.diag(np.diag(m2)))


@pytest.mark.parametrize("q,p,expected", [(1, 3, 0.7), (2, 4, 1 - 12 / 30), (2, 5, 1 - 12 / 30),
                                          (3, 5, 1 - 20 / 42)])
def test_infsup_constant_values(q, p, expected):
    assert infsup_constant2(q, p) == pytest.approx(expected)


def test_infsup_requires_p_at_least_q_plus_2():
    with pytest.raises(ValueError):
        infsup_constant2(2, 3)
    with pytest.raises(ValueError):
        infsup_test_function(np.ones(3), 2, 3)
    with pytest.raises(ValueError):
        infsup_test_function(np.ones(4), 2, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(2, 4), st.integers(0, 10_000))
def test_infsup_bound_holds(q, extra, seed):
    p = q + extra
    assert infsup_ratios(q, p, n_samples=50, seed=seed).min() >= -1e-12


def test_infsup_test_function_vanishes_at_edge_ends():
    mu = np.array([0.3, -1.2, 0.5])
    v = infsup_test_function(mu, 2, 5)
    assert np.allclose(v @ jacobi_psi_table(4, [0.0, 1.0]).T, 0.0)
