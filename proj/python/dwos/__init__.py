"""Differentiable walk-on-spheres solvers for elliptic PDEs."""

from ._dwos import (
    Domain,
    Field,
    PDEProblem,
    PdeKind,
    default_sigma_bar,
    disk_with_obstacles,
    estimate_solution,
    green_norm,
    loss_gradient,
    measurement_grid,
    poisson_kernel,
    run_config,
    unit_disk,
    unit_square,
)

__all__ = [
    "Domain",
    "Field",
    "PDEProblem",
    "PdeKind",
    "default_sigma_bar",
    "disk_with_obstacles",
    "estimate_solution",
    "green_norm",
    "loss_gradient",
    "measurement_grid",
    "poisson_kernel",
    "run_config",
    "unit_disk",
    "unit_square",
]
