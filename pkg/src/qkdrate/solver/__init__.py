"""Conic solver: problem container, strategies, and certification."""

from .core import (CertReport, ConicProblem, SolveResult, certify,
                   objective_value, solve)
from .cones import EntropyCone

__all__ = ["CertReport", "ConicProblem", "EntropyCone", "SolveResult",
           "certify", "objective_value", "solve"]
