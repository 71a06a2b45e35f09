"""Cone fixed-point certificates for elliptic systems with functional boundary data."""

__version__ = "0.1.0"

from .certificates import certify_existence, certify_nonexistence, collect_constants
from .expr import parse
from .fixedpoint import ComponentSpec, DiscreteSystem, SystemSpec, picard_solve
from .geometry import Disk, Rectangle, build_grid
from .greens import SolutionOperator, SolverConfig
from .operator import BoundarySpec, EllipticSpec, assemble
from .problem import load_problem

__all__ = [
    "BoundarySpec",
    "ComponentSpec",
    "DiscreteSystem",
    "Disk",
    "EllipticSpec",
    "Rectangle",
    "SolutionOperator",
    "SolverConfig",
    "SystemSpec",
    "assemble",
    "build_grid",
    "certify_existence",
    "certify_nonexistence",
    "collect_constants",
    "load_problem",
    "parse",
    "picard_solve",
]
