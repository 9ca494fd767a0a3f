"""Borehole thermal energy storage: affine state-space model, simulation and tracking MPC."""

__version__ = "0.1.0"

from .assembly import AffineSystem, StateLayout, assemble, assemble_system, spectral_radius, step
from .config import Config, default_config, load_config
from .errors import AssemblyError, BtesError, ConfigError, MeasurementError, SimulationDiverged

__all__ = [
    "AffineSystem",
    "AssemblyError",
    "BtesError",
    "Config",
    "ConfigError",
    "MeasurementError",
    "SimulationDiverged",
    "StateLayout",
    "assemble",
    "assemble_system",
    "default_config",
    "load_config",
    "spectral_radius",
    "step",
]
