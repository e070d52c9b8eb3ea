"""Lattice reaction-diffusion solvers with a stochastic dynamical boundary."""

__version__ = "0.1.0"

from .boundary import (BoundaryPath, PearsonParams, deterministic_path, downsample,
                       holder_seminorm, simulate_pearson)
from .heat_kernel import boundary_solution_u, gd, hd, semigroup_apply
from .lattice import (Lattice, LatticeField, d_minus, d_plus, inner_product, laplacian_h,
                      lp_norm)
from .solver import (SchemeConfig, StabilityError, c_explicit, check_stability,
                     local_truncation_error, run_direct, run_split, step_direct)

__all__ = [
    "BoundaryPath", "PearsonParams", "deterministic_path", "downsample", "holder_seminorm",
    "simulate_pearson", "boundary_solution_u", "gd", "hd", "semigroup_apply", "Lattice",
    "LatticeField", "d_minus", "d_plus", "inner_product", "laplacian_h", "lp_norm",
    "SchemeConfig", "StabilityError", "c_explicit", "check_stability",
    "local_truncation_error", "run_direct", "run_split", "step_direct",
]
