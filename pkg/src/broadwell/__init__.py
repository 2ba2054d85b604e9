"""Stationary Broadwell model on the unit square: truncated solver and diagnostics."""

from .core import (BoundaryTrace, FieldQuartet, Grid, SolverParams, component_masses, mass,
                   mollify, truncate, truncate_boundary, truncated_collision)
from .errors import BracketViolation, BroadwellError, IterationCap, NonMonotone, SingularJacobian
from .fixed_point import (alternating_bracket_pair, continuation, damped_map,
                          damping_continuation, picard_fixed_point, solve_truncated)
from .diagnostics import (DiagnosticsReport, diagnose, entropy_production, exceptional_set,
                          flux_balance, line_conservation, renormalized_residual, tail_mass,
                          translation_modulus)
from .oracle import cross_validate, newton_solve
from .transport import LineProblem, Direction, mild_residual, solve_component, solve_line

__version__ = "0.1.0"
