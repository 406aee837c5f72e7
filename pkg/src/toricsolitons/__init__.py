"""Toric generalized almost-Kahler-Ricci solitons.

Numerical tools for involutive-type almost-Kahler metrics on Delzant
polytopes: curvature of a metric field ``H``, the Donaldson-Futaki invariant
and soliton vector field, explicit non-Kahler deformations, and a
collocation Newton solver.
"""

from .curvature import (SolitonVector, chern_ricci, chern_scalar, consistency_constant,
                        grad_norm_f, laplacian_f, modified_scalar, modified_scalar_divform,
                        soliton_residual)
from .deform import build_deformation, default_spec, verify_family
from .field import (MetricField, analytic_field, check_boundary_conditions, field_from_potential,
                    grid_field, guillemin_field, kahler_defect, polynomial_field)
from .futaki import futaki, futaki_vector, normalization_residual, solve_soliton_vf
from .polytope import (DelzantPolytope, Facet, PolytopeError, interior_grid, is_delzant,
                       is_reflexive, load_polytope, quadrature, transform)
from .solve import SolveConfig, solve_1d, solve_newton

__version__ = "0.1.0"

__all__ = [
    "DelzantPolytope", "Facet", "MetricField", "PolytopeError", "SolitonVector", "SolveConfig",
    "analytic_field", "build_deformation", "check_boundary_conditions", "chern_ricci", "chern_scalar",
    "consistency_constant", "default_spec", "field_from_potential", "futaki", "futaki_vector",
    "grad_norm_f", "grid_field", "guillemin_field", "interior_grid", "is_delzant", "is_reflexive",
    "kahler_defect", "laplacian_f", "load_polytope", "modified_scalar", "modified_scalar_divform",
    "normalization_residual", "polynomial_field", "quadrature", "solve_1d", "solve_newton",
    "soliton_residual", "solve_soliton_vf", "transform", "verify_family",
]
