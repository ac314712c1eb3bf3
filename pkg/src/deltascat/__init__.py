"""Layer potentials, resonances and wave expansions for delta potentials on hypersurfaces."""

__version__ = "0.1.0"

from .errors import (BranchError, ConvergenceError, DeltaScatError, IllConditionedError,
                     IncompleteExpansionError, InvalidGeometryError)
from .geometry import (GammaDiscretization, build_curve, build_points, build_sphere,
                       geometry_from_config, hull_diameter, load_geometry)
from .greens import ComplexFrequency, eval_green, hankel1, verify_kernel_bounds
from .layer import LayerMatrix, PotentialSpec, apply, assemble, operator_norm
from .resonances import (Box, Circle, ResonanceSet, beyn_solve, count_zeros, find_resonances,
                         free_region_check, refine_newton, residue_extract, resolvent_apply)
from .sources import PiecewisePolynomial
from .spectra import (NormSweepTable, fit_decay_exponent, norm_sweep, restriction_norm,
                      schur_bound)
from .wave1d import compare_expansion, evolve, expansion_eval

__all__ = [
    "BranchError", "ConvergenceError", "DeltaScatError", "IllConditionedError",
    "IncompleteExpansionError", "InvalidGeometryError",
    "GammaDiscretization", "build_curve", "build_points", "build_sphere",
    "geometry_from_config", "hull_diameter", "load_geometry",
    "ComplexFrequency", "eval_green", "hankel1", "verify_kernel_bounds",
    "LayerMatrix", "PotentialSpec", "apply", "assemble", "operator_norm",
    "Box", "Circle", "ResonanceSet", "beyn_solve", "count_zeros", "find_resonances",
    "free_region_check", "refine_newton", "residue_extract", "resolvent_apply",
    "PiecewisePolynomial",
    "NormSweepTable", "fit_decay_exponent", "norm_sweep", "restriction_norm", "schur_bound",
    "compare_expansion", "evolve", "expansion_eval",
]
