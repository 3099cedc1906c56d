"""Radial cavitation in a self-gravitating compressible elastic ball.

Energy-minimising radial deformations under a prescribed outer displacement,
computed with a gradient-flow predictor and a shooting corrector.
"""

from .energy_model import (
    InhomogeneousModel,
    PowerLawModel,
    StretchState,
    VolumetricTerm,
    WeightFunction,
    energy_density,
    h_min_argument,
    paper_model,
    partials,
    stress_free_D,
    validate_growth,
)
from .flow import FlowConfig, flow_minimize, flow_step
from .gravity import DensityProfile, brute_force_potential, mass_within, potential_energy
from .pipeline import find_critical_lambda, oracle_check, solve, sweep, validate
from .radial_field import (
    RadialField,
    affine_map,
    canonical_grid,
    cauchy_stress,
    el_residual,
    incompressible_map,
    mechanical_energy,
    total_energy,
)
from .shooting import el_rhs, integrate_ivp, shoot_residual, solve_free_boundary, solve_shooting

__version__ = "0.1.0"
