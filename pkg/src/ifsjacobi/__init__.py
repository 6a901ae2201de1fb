"""Jacobi matrices of balanced and equilibrium measures on IFS attractors."""

from .conformal import Segment, conformal_map, joukowsky, map_segments
from .equilibrium import (GapRootSystem, equilibrium_atoms, equilibrium_density,
                          equilibrium_measure, solve_gap_roots)
from .errors import (BudgetError, ConvergenceError, DomainError, IFSJacobiError, InstabilityError,
                     NumericError, ParameterError, PoleError, SingularityError, StateError)
from .ifs import (DiscreteMeasure, IFSSystem, IntervalUnion, balanced_atoms, interval_union,
                  julia_exact_jacobi)
from .jacobi import (JacobiMatrix, coincidence_range, golub_welsch, rkpw_add_atoms, rkpw_jacobi,
                     stieltjes_jacobi)
from .pipelines import ConvergenceReport, algorithm0, algorithm1, algorithm2
from .potential import (capacity_from_potential, evaluate, log_transform, ratio_sequence,
                        root_asymptotics)
from .quadrature import chebyshev_rule

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "ConvergenceError", "ConvergenceReport", "DiscreteMeasure", "DomainError",
    "GapRootSystem", "IFSJacobiError", "IFSSystem", "InstabilityError", "IntervalUnion",
    "JacobiMatrix", "NumericError", "ParameterError", "PoleError", "Segment",
    "SingularityError", "StateError", "algorithm0", "algorithm1", "algorithm2",
    "balanced_atoms", "capacity_from_potential", "chebyshev_rule", "coincidence_range",
    "conformal_map", "equilibrium_atoms", "equilibrium_density", "equilibrium_measure",
    "evaluate", "golub_welsch", "interval_union", "joukowsky", "julia_exact_jacobi",
    "log_transform", "map_segments", "ratio_sequence", "rkpw_add_atoms", "rkpw_jacobi",
    "root_asymptotics", "solve_gap_roots", "stieltjes_jacobi",
]
