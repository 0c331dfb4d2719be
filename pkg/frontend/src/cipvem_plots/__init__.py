"""Figures from cipvem CSV and VTK artifacts."""

from .convergence import PlotError, load_series, plot_convergence
from .field import load_field, plot_field

__version__ = "0.1.0"

__all__ = [
    "PlotError",
    "load_series",
    "plot_convergence",
    "load_field",
    "plot_field",
    "__version__",
]
