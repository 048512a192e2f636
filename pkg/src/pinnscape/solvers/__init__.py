"""Classical numerical oracles and the gridded solution container."""

from .fields import SolutionField, SolverError, load_field, sample_field, save_field
from .burgers import solve_burgers_spectral
from .wave import field_energy, solve_wave_chebyshev
from .navier_stokes import solve_ns_ftcs, vertical_flux

__all__ = [
    "SolutionField",
    "SolverError",
    "sample_field",
    "save_field",
    "load_field",
    "solve_burgers_spectral",
    "solve_wave_chebyshev",
    "field_energy",
    "solve_ns_ftcs",
    "vertical_flux",
]
