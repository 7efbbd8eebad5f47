"""
Permuton solvers - region data, boundary-value solvers, density fields, sampler and checks
"""
from .boundary_solver import BoundaryValues, solve_boundary
from .density import DensityField, build_field, grid
from .errors import PermutonError
from .region import RegionSpec, load_region

__all__ = [
    "BoundaryValues",
    "DensityField",
    "PermutonError",
    "RegionSpec",
    "build_field",
    "grid",
    "load_region",
    "solve_boundary",
]
