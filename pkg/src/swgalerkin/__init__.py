"""Standard Galerkin finite element solvers for the 1D shallow water equations."""

from .errors import (BlowUpError, ConfigError, DryStateError, InvalidArgumentError,
                     NoSteadyStateError, SingularMatrixError)
from .mesh_space import (CoefVec, Constraint, FemSpace, Mesh, make_perturbed_mesh,
                         make_space, make_uniform_mesh)
from .assembly import gauss_rule, l2_error, l2_norm, l2_project, mass_matrix, weak_load
from .problems import Bathymetry, Formulation, ProblemConfig, make_bathymetry, preset
from .semidiscrete import SimState, build_scheme
from .time_integration import ButcherTableau, get_tableau, integrate, rk_step, run
from .steady_state import SteadyProfile, solve_steady, steady_preservation_test
from .diagnostics import RateTable, convergence_study, froude_sweep, well_balance_study

__version__ = "0.1.0"

__all__ = [
    "BlowUpError", "ConfigError", "DryStateError", "InvalidArgumentError",
    "NoSteadyStateError", "SingularMatrixError", "CoefVec", "Constraint", "FemSpace",
    "Mesh", "make_perturbed_mesh", "make_space", "make_uniform_mesh", "gauss_rule",
    "l2_error", "l2_norm", "l2_project", "mass_matrix", "weak_load", "Bathymetry",
    "Formulation", "ProblemConfig", "make_bathymetry", "preset", "SimState",
    "build_scheme", "ButcherTableau", "get_tableau", "integrate", "rk_step", "run",
    "SteadyProfile", "solve_steady", "steady_preservation_test", "RateTable",
    "convergence_study", "froude_sweep", "well_balance_study", "__version__",
]
