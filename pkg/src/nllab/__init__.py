"""nllab: a numerical laboratory for nonlocal parabolic equations.

Discretizes d_t u - Lu = f for jump-measure families (including measures
that are singular with respect to volume) and measures kernel conditions,
weak Harnack quotients, Hoelder exponents, Moser-iteration constants and
the failure of the strong Harnack inequality for the axes measure.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, InvalidInput, InvalidSpec, NumericalFailure,
                     QuadratureFailure)
from .measures import (Annulus, Ball, Cell, Complement, EquationCoefficients,
                       MeasureSpec, cusp_angular_fraction, cusp_geometry,
                       effective_order, measure_of_set, robust_normalization,
                       second_moment_in_ball, sphere_area,
                       symbol_normalization)

__all__ = [
    "__version__",
    "ConfigError", "InvalidInput", "InvalidSpec", "NumericalFailure",
    "QuadratureFailure",
    "Annulus", "Ball", "Cell", "Complement", "EquationCoefficients",
    "MeasureSpec", "cusp_angular_fraction", "cusp_geometry",
    "effective_order", "measure_of_set", "robust_normalization",
    "second_moment_in_ball", "sphere_area", "symbol_normalization",
]
