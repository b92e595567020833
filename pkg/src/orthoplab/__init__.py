"""Numerical lab for the orthotropic p-Laplacian in two dimensions."""

from .energy import ProblemSpec, energy_gradient, energy_orthotropic, energy_regularized, g, hessian_apply
from .grid import BallSpec, Domain, GridFunction, VectorField, discrete_gradient
from .solver import NonConvergence, SolverConfig, continuation_solve, solve_regularized, weak_residual

__all__ = [
    "BallSpec",
    "Domain",
    "GridFunction",
    "NonConvergence",
    "ProblemSpec",
    "SolverConfig",
    "VectorField",
    "continuation_solve",
    "discrete_gradient",
    "energy_gradient",
    "energy_orthotropic",
    "energy_regularized",
    "g",
    "hessian_apply",
    "solve_regularized",
    "weak_residual",
]

__version__ = "0.1.0"
