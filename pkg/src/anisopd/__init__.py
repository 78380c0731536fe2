"""Anisotropic power-density tomography on the square [-1, 1]^2.

Forward solves for a conductivity ``gamma = |gamma|^1/2 Atilde^2(xi, zeta)``,
power-density data ``H_ij = gamma grad u_i . grad u_j``, reconstruction of
the anisotropy ``(xi, zeta)`` and of the determinant ``|gamma|^1/2``, and a
configuration-driven experiment runner.
"""
from .anisotropy import (
    AnisotropyEstimate,
    normal_system,
    reconstruct_least_squares,
    reconstruct_pointwise,
    rotated_illumination_family,
)
from .conductivity import (
    AnisotropySqrt,
    AnisotropyXiZeta,
    ConductivityField,
    assemble_tensor,
    constant_conductivity,
    load_conductivity_csv,
    phantom,
    sqrt_of_anisotropy,
)
from .det_coupled import assemble_coupled, reconstruct_inv_detA, solve_coupled
from .det_theta import lie_bracket, reconstruct_detsqrt, reconstruct_log_detA, reconstruct_theta
from .experiments import ExperimentConfig, ReconstructionReport, compute_errors, run_experiment
from .forward import (
    Illumination,
    NoiseSpec,
    PowerDensitySet,
    add_noise,
    coordinate_pair,
    power_densities,
    solve_illuminations,
    standard_quadruple,
    standard_triplet,
)
from .frames import (
    AdmissibilityError,
    DataVectorFields,
    FrameData,
    admissibility,
    gram_schmidt_transfer,
    xy_fields,
)
from .grid import Grid, SolverError, gradient, solve_general_elliptic, solve_poisson_dirichlet

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "AnisotropyEstimate", "AnisotropySqrt", "AnisotropyXiZeta",
    "ConductivityField", "DataVectorFields", "ExperimentConfig", "FrameData", "Grid",
    "Illumination", "NoiseSpec", "PowerDensitySet", "ReconstructionReport", "SolverError",
    "add_noise", "admissibility", "assemble_coupled", "assemble_tensor", "compute_errors",
    "constant_conductivity", "coordinate_pair", "gradient", "gram_schmidt_transfer",
    "lie_bracket", "load_conductivity_csv", "normal_system", "phantom", "power_densities",
    "reconstruct_detsqrt", "reconstruct_inv_detA", "reconstruct_least_squares",
    "reconstruct_log_detA", "reconstruct_pointwise", "reconstruct_theta",
    "rotated_illumination_family", "run_experiment", "solve_coupled",
    "solve_general_elliptic", "solve_illuminations", "solve_poisson_dirichlet",
    "sqrt_of_anisotropy", "standard_quadruple", "standard_triplet", "xy_fields",
]
