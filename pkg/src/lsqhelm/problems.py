"""Benchmark problems with closed-form solutions, and the L2 error metric."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .basis import ElementBasis, quadrature
from .local import DEFAULT_RHO, ProblemCoefficients
from .mesh import MeshTopology

__all__ = [
    "BenchmarkProblem",
    "make_duct",
    "make_lens",
    "make_manufactured",
    "make_problem",
    "duct_amplitudes",
    "lens_speed",
    "relative_l2_error",
]


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    """A Helmholtz problem together with its exact solution.

    ``exact(x, y)`` returns complex values, ``gradient(x, y)`` a pair
    ``(u_x, u_y)``.
    """

    name: str
    domain: tuple
    coeffs: ProblemCoefficients
    exact: Callable
    gradient: Callable
    k_mode: int | None = None

    @property
    def omega(self) -> float:
        return self.coeffs.omega

    def impedance_data(self, x, y, nx, ny):
        ux, uy = self.gradient(x, y)
        return ux * nx + uy * ny + 1j * self.coeffs.kappa(x, y) * self.exact(x, y)


def _with_boundary(name, domain, omega, speed, source, exact, grad, rho, k_mode=None):
    def boundary(x, y, nx, ny):
        ux, uy = grad(x, y)
        return ux * nx + uy * ny + 1j * (omega / speed(x, y)) * exact(x, y)

    coeffs = ProblemCoefficients(omega, speed, source, boundary, rho)
    return BenchmarkProblem(name, domain, coeffs, exact, grad, k_mode)


def duct_amplitudes(omega: float, k_mode: int) -> tuple[complex, complex, float]:
    """Amplitudes ``(A1, A2)`` and axial wave number of the duct mode."""
    kp = k_mode * np.pi
    if omega <= kp:
        raise ValueError(f"omega={omega} <= k*pi={kp}: the duct mode is evanescent")
    wx = np.sqrt(omega**2 - kp**2)
    M = np.array([
        [wx, -wx],
        [(omega - wx) * np.exp(-2j * wx), (omega + wx) * np.exp(2j * wx)],
    ])
    a1, a2 = np.linalg.solve(M, np.array([-1j, 0.0]))
    return complex(a1), complex(a2), float(wx)


def make_duct(omega: float, k_mode: int, rho: float = DEFAULT_RHO) -> BenchmarkProblem:
    """Guided mode ``cos(k pi y) (A1 e^{-i wx x} + A2 e^{i wx x})`` on [0,2]x[0,1]."""
    a1, a2, wx = duct_amplitudes(omega, k_mode)
    kp = k_mode * np.pi

    def exact(x, y):
        return np.cos(kp * y) * (a1 * np.exp(-1j * wx * x) + a2 * np.exp(1j * wx * x))

    def grad(x, y):
        ex = a1 * np.exp(-1j * wx * x) + a2 * np.exp(1j * wx * x)
        dex = -1j * wx * a1 * np.exp(-1j * wx * x) + 1j * wx * a2 * np.exp(1j * wx * x)
        return np.cos(kp * y) * dex, -kp * np.sin(kp * y) * ex

    def speed(x, y):
        return np.ones(np.broadcast(x, y).shape)

    def source(x, y):
        return np.zeros(np.broadcast(x, y).shape, dtype=complex)

    return _with_boundary("duct", ((0.0, 0.0), (2.0, 1.0)), omega, speed, source,
                          exact, grad, rho, k_mode)


def _gauss(x, y):
    return np.exp(-32.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2))


def lens_speed(x, y):
    """Gaussian lens profile, between 7/6 (centre) and 4/3."""
    return (4.0 / 3.0) * (1.0 - 0.125 * _gauss(x, y))


def make_lens(omega: float, rho: float = DEFAULT_RHO) -> BenchmarkProblem:
    """``u = c(x, y) exp(i omega x y)`` with the Gaussian lens speed on [0,1]^2."""

    def exact(x, y):
        return lens_speed(x, y) * np.exp(1j * omega * x * y)

    def grad(x, y):
        E = _gauss(x, y)
        c = lens_speed(x, y)
        ph = np.exp(1j * omega * x * y)
        cx = (32.0 / 3.0) * (x - 0.5) * E
        cy = (32.0 / 3.0) * (y - 0.5) * E
        return (cx + 1j * omega * y * c) * ph, (cy + 1j * omega * x * c) * ph

    def source(x, y):
        E = _gauss(x, y)
        c = lens_speed(x, y)
        ph = np.exp(1j * omega * x * y)
        cx = (32.0 / 3.0) * (x - 0.5) * E
        cy = (32.0 / 3.0) * (y - 0.5) * E
        cxx = (32.0 / 3.0) * E * (1.0 - 64.0 * (x - 0.5) ** 2)
        cyy = (32.0 / 3.0) * E * (1.0 - 64.0 * (y - 0.5) ** 2)
        lap = ph * (cxx + cyy + 2j * omega * (y * cx + x * cy)
                    - omega**2 * (x**2 + y**2) * c)
        return -lap - (omega / c) ** 2 * c * ph

    return _with_boundary("lens", ((0.0, 0.0), (1.0, 1.0)), omega, lens_speed, source,
                          exact, grad, rho)


def make_manufactured(
    omega: float,
    degree: int,
    domain=((0.0, 0.0), (1.0, 1.0)),
    seed: int = 0,
    rho: float = DEFAULT_RHO,
) -> BenchmarkProblem:
    """Random complex polynomial of per-axis degree ``degree``, constant wave speed."""
    rng = np.random.default_rng(seed)
    cf = rng.standard_normal((degree + 1, 2 * (degree + 1))).view(complex)
    cfx = npoly.polyder(cf, axis=0)
    cfy = npoly.polyder(cf, axis=1)
    cfxx = npoly.polyder(cf, 2, axis=0)
    cfyy = npoly.polyder(cf, 2, axis=1)

    def exact(x, y):
        return npoly.polyval2d(x, y, cf)

    def grad(x, y):
        return npoly.polyval2d(x, y, cfx), npoly.polyval2d(x, y, cfy)

    def speed(x, y):
        return np.ones(np.broadcast(x, y).shape)

    def source(x, y):
        lap = npoly.polyval2d(x, y, cfxx) + npoly.polyval2d(x, y, cfyy)
        return -lap - omega**2 * npoly.polyval2d(x, y, cf)

    return _with_boundary("manufactured", domain, omega, speed, source, exact, grad, rho)


def make_problem(name: str, omega: float, k_mode: int = 19, rho: float = DEFAULT_RHO,
                 degree: int = 2) -> BenchmarkProblem:
    if name == "duct":
        return make_duct(omega, k_mode, rho)
    if name == "lens":
        return make_lens(omega, rho)
    if name == "manufactured":
        return make_manufactured(omega, degree, rho=rho)
    raise ValueError(f"unknown problem {name!r}")


def relative_l2_error(
    u_h: np.ndarray,
    problem: BenchmarkProblem,
    mesh: MeshTopology,
    basis: ElementBasis,
    quad_order: int | None = None,
) -> float:
    """``||u_ex - u_h|| / ||u_ex||`` in L2(Omega), by elementwise quadrature."""
    order = basis.p + 3 if quad_order is None else quad_order
    if order < basis.p + 3:
        raise ValueError("error quadrature needs order >= p + 3")
    quad = quadrature(order)
    xi, eta = quad.points2d[:, 0], quad.points2d[:, 1]
    val, _, _ = basis.evaluate(xi, eta)
    w = quad.weights2d * mesh.hx * mesh.hy
    origin = mesh.element_origin()
    err2 = ex2 = 0.0
    chunk = 4096
    for s in range(0, mesh.n_elements, chunk):
        sl = slice(s, min(s + chunk, mesh.n_elements))
        px = origin[sl, :1] + mesh.hx * xi[None, :]
        py = origin[sl, 1:] + mesh.hy * eta[None, :]
        ue = problem.exact(px, py)
        uh = u_h[sl] @ val.T
        err2 += float(np.sum(np.abs(ue - uh) ** 2 * w))
        ex2 += float(np.sum(np.abs(ue) ** 2 * w))
    if ex2 == 0.0:
        raise ValueError("exact solution has zero L2 norm")
    return float(np.sqrt(err2 / ex2))
