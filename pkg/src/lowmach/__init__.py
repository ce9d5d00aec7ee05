"""MAC pressure-correction schemes for barotropic flow and their low Mach number limit."""
from .grid import DualFaceStencil, GridError, MacGrid, build_grid, evaluate_dual_flux
from .compressible import (
    SchemeParams,
    SchemeState,
    advance,
    correction_step,
    init_state,
    prediction_step,
    scale_pressure_gradient,
)

__all__ = [
    "DualFaceStencil",
    "GridError",
    "MacGrid",
    "SchemeParams",
    "SchemeState",
    "advance",
    "build_grid",
    "correction_step",
    "evaluate_dual_flux",
    "init_state",
    "prediction_step",
    "scale_pressure_gradient",
]
__version__ = "0.1.0"
