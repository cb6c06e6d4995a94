"""Heat conduction with aging memory: kernels, flux laws, solver, energy checks."""

__version__ = "0.1.0"

from .kernels import (  # noqa: E402
    AgingKernel,
    check_admissibility,
    kernel_derivative,
    make_aging_exponential,
    make_classical_exponential,
    make_constant,
    make_linear_aging,
    make_rescaled,
)
from .pde_solver import Discretization, ProblemSpec, solve  # noqa: E402

__all__ = [
    "AgingKernel",
    "Discretization",
    "ProblemSpec",
    "check_admissibility",
    "kernel_derivative",
    "make_aging_exponential",
    "make_classical_exponential",
    "make_constant",
    "make_linear_aging",
    "make_rescaled",
    "solve",
]
