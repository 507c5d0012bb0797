"""Stochastically forced Allen-Cahn fronts and their mean curvature limit."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    ParameterError,
    RangeError,
    RootCollisionError,
    SolverError,
    StochacError,
)
from .grid import ScalarField  # noqa: E402

__all__ = [
    "BlowUpError",
    "ParameterError",
    "RangeError",
    "RootCollisionError",
    "ScalarField",
    "SolverError",
    "StochacError",
    "__version__",
]
