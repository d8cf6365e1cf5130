"""conekit: eigenfunction expansions, product-formula measures, and
convolution semigroups for Laplace-Beltrami operators on cone-like 2-D
manifolds.

The surface is ``M = [0, inf) x T`` with metric ``dx^2 + A(x)^2 dtheta^2``;
all computations reduce to half-line Sturm-Liouville problems indexed by
the angular mode ``k``, their spectral measures, and the measures
appearing in product formulas for the radial eigenfunctions.
"""

from .errors import (
    ConekitError,
    ConfigError,
    ConvergenceError,
    NumericsError,
    UnsupportedRegimeError,
)

__version__ = "0.1.0"

__all__ = [
    "ConekitError",
    "ConfigError",
    "ConvergenceError",
    "NumericsError",
    "UnsupportedRegimeError",
    "__version__",
]
