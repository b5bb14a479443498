"""Equidistribution of points with prescribed iterated derivative for polynomial maps."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Poly,
    classify_critical_orbits,
    critical_points,
    derivative,
    green_grid,
    green_value,
    normalize_monic,
    orbit_jet,
)
from .roots import PhaseDerivative, ParamDerivative, RootCloud, solve_all  # noqa: E402
