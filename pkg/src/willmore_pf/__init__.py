"""Minimizing-movement solver for the volume-constrained phase-field Willmore flow."""

from .energy import (
    EnergyAssembly,
    assemble,
    chemical_potential,
    el_residual,
    gradient_mm,
    mm_functional,
    willmore_energy,
)
from .grid import Grid, GridMismatchError, inner, laplacian_neumann, mean, project_mean_zero
from .minimizer import MinimizeConfig, MinimizeReport, minimize_step
from .potential import Potential, ValidationReport, polynomial_potential, quartic_double_well, validate_assumptions
from .scheme import (
    SchemeState,
    StepFailure,
    Trace,
    check_estimates,
    evaluate_interpolant,
    refinement_experiment,
    run,
    stability_experiment,
)

__version__ = "0.1.0"
