"""Allen-Cahn phase fields, Gaussian-density entropy and interface density diagnostics."""

from .dynamics import PhaseState, StepControl, default_control, run, step
from .grid import GridSpec, ScalarField, make_grid
from .potential import energy_constant, get_potential, standard_potential

__version__ = "0.1.0"

__all__ = ["GridSpec", "PhaseState", "ScalarField", "StepControl", "default_control",
           "energy_constant", "get_potential", "make_grid", "run", "standard_potential", "step"]
