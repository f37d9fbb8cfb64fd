"""Galerkin FEM for singularly perturbed problems on S-type meshes, with balanced-norm error analysis."""
from .basis import QuadratureRule, ReferenceBasis, gauss_legendre, gauss_lobatto, hermite, lagrange_gl
from .errors import BalnormError
from .fem import DiscreteFunction, assemble, galerkin_solve, solve
from .mesh import CellKind, STypeMesh, classify_cell, make_mesh, uniform_mesh
from .norms import NormReport, norm_of_difference, rate_fit
from .operators import (chi_tau, hybrid_P, interpolate_gl, interpolate_hermite, ritz_projection,
                        weighted_l2_projection)
from .problems import CATALOG, get_problem
from .study import StudyConfig, compare_energy_vs_balanced, run_operator_verification, run_study

__version__ = "0.1.0"
