"""Render figures from arealaw sweep CSVs.

Consumes only the CSV contract of the simulation CLI and never recomputes
physics: every plotted quantity is a CSV column, and the bound lines pass
through the emitted bound values themselves.
"""

from .tables import SweepError, SweepTable
from .figures import (build_area_figure, build_convergence_figure,
                      build_sie_figure, plot_area_scaling, plot_convergence,
                      plot_sie_histogram)

__version__ = "0.1.0"
