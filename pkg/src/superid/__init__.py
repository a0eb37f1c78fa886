"""Identification of the superposition operator g_u in -Lap y + g_u(y) = f."""

from .adjoint import l2_gradient, objective
from .control import PwcControl, compose_u_of_y, g_u_eval, g_u_field, project_onto_pwc
from .estimator import SuperpositionIdentifier
from .fem import Mesh, SolverError, build_mesh
from .optimize import OptimSettings, RunReport, gradient_projection, theta_eps, theta_zero
from .problem import Problem, example1, example2
from .state import NewtonSettings, solve_poisson, solve_state

__all__ = [
    "Mesh",
    "NewtonSettings",
    "OptimSettings",
    "Problem",
    "PwcControl",
    "RunReport",
    "SolverError",
    "SuperpositionIdentifier",
    "build_mesh",
    "compose_u_of_y",
    "example1",
    "example2",
    "g_u_eval",
    "g_u_field",
    "gradient_projection",
    "l2_gradient",
    "objective",
    "project_onto_pwc",
    "solve_poisson",
    "solve_state",
    "theta_eps",
    "theta_zero",
]
