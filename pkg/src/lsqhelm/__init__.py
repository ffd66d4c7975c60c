"""Least-squares interface method for Helmholtz problems with large wave numbers."""
from .basis import EdgeBasis, ElementBasis, QuadratureRule, element_basis, quadrature
from .interface import InterfaceSystem, SolveReport, apply_S, build_rhs, cg_solve, recover_solution
from .local import LocalSolvers, ProblemCoefficients, build_local_solvers, solve_u1, solve_u2
from .mesh import DecompositionLayout, MeshTopology, build_decomposition, build_mesh
from .problems import BenchmarkProblem, make_duct, make_lens, make_manufactured, relative_l2_error

__version__ = "0.1.0"
