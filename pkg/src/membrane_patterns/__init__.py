"""Finite-element simulation of pattern formation in two-phase membranes.

The model couples a Cahn-Hilliard equation for the lipid order parameter
``u`` to a fourth-order gradient flow for the membrane height ``h`` on the
flat unit torus. Time stepping is a convex-concave splitting scheme that
conserves mass and decreases a discrete energy for every step size.
"""

from .errors import (ConfigError, ConvergenceError, InvalidMeshError, InvalidParameterError,
                     MembraneError, OracleFailure, PreconditionError, SingularMatrixError,
                     StepFailure)
from .mesh import SparseMatrix, TorusMesh, assemble_mass, assemble_stiffness, build_torus_mesh
from .model import ModelParams, Operators, SimState
from .potentials import PotentialSpec, log_extended, membrane_potential, moreau_yosida, polynomial
from .scheme import SolverSettings, StepStats, advance, ch_step, height_step, residual_weak_form

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConvergenceError", "InvalidMeshError", "InvalidParameterError",
    "MembraneError", "OracleFailure", "PreconditionError", "SingularMatrixError", "StepFailure",
    "SparseMatrix", "TorusMesh", "assemble_mass", "assemble_stiffness", "build_torus_mesh",
    "ModelParams", "Operators", "SimState",
    "PotentialSpec", "log_extended", "membrane_potential", "moreau_yosida", "polynomial",
    "SolverSettings", "StepStats", "advance", "ch_step", "height_step", "residual_weak_form",
]
