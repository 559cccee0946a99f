"""Self-adjoint extensions of regular Sturm-Liouville operators.

Boundary data maps, Krein resolvent formulas, spectral shift functions and
von Neumann's parametrization for tau = r^{-1}(-(p u')' + q u) on [a, b].
"""

from .boundary import (
    ANTIPERIODIC,
    DIRICHLET,
    NEUMANN,
    PERIODIC,
    ABPair,
    CoupledBC,
    SeparatedBC,
)
from .problem import Problem, build_problem, preset

__version__ = "0.1.0"

__all__ = [
    "ABPair",
    "ANTIPERIODIC",
    "CoupledBC",
    "DIRICHLET",
    "NEUMANN",
    "PERIODIC",
    "Problem",
    "SeparatedBC",
    "build_problem",
    "preset",
]
