"""Radial variational stability solver for viscous cylindrical pinch columns."""
from __future__ import annotations

from .backend import BACKEND
from .config import RunConfig, parse_config
from .eigensolver import (
    EigenResult,
    ResidualReport,
    smallest_eigenpair,
    verify_minimizer_euler_lagrange,
)
from .equilibrium import (
    AdmissibilityReport,
    CriterionReport,
    Equilibrium,
    PressureProfile,
    build_equilibrium,
    check_admissibility,
    criterion_scan,
)
from .evolve import EvolveState, growth_bound_check, integrate
from .forms import (
    ModeForms,
    ModePair,
    VacuumOperator,
    assemble_constraint,
    assemble_dissipation,
    assemble_ideal,
    assemble_mode_forms,
    condense_vacuum,
)
from .growthrate import GrowthResult, lambda_curve, solve_fixed_point
from .mesh import FemSpace, RadialGrid, make_grid, plasma_space, quadrature, vacuum_space
from .scan import (
    FitResult,
    ScanReport,
    decay_check,
    dissipation_scaling_check,
    scan_modes,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "AdmissibilityReport",
    "CriterionReport",
    "Equilibrium",
    "PressureProfile",
    "build_equilibrium",
    "check_admissibility",
    "criterion_scan",
    "ModeForms",
    "ModePair",
    "VacuumOperator",
    "assemble_constraint",
    "assemble_dissipation",
    "assemble_ideal",
    "assemble_mode_forms",
    "condense_vacuum",
    "FemSpace",
    "RadialGrid",
    "make_grid",
    "plasma_space",
    "quadrature",
    "vacuum_space",
    "EigenResult",
    "ResidualReport",
    "smallest_eigenpair",
    "verify_minimizer_euler_lagrange",
    "GrowthResult",
    "lambda_curve",
    "solve_fixed_point",
    "FitResult",
    "ScanReport",
    "decay_check",
    "dissipation_scaling_check",
    "scan_modes",
    "EvolveState",
    "growth_bound_check",
    "integrate",
    "RunConfig",
    "parse_config",
]
