"""Figure rendering for pinnscape run artifacts."""

from .artifacts import GriddedField, LandscapeGrid, load_field, load_grid, load_history, load_manifest
from .figures import plot_history, plot_landscape, plot_triptych, render_run_report

__version__ = "0.1.0"
