"""Simulator of a neutral-atom quantum register addressed in a magnetic field gradient."""

from atomreg.bloch import (
    PulseShape,
    TwoLevelState,
    TwoLevelUnitary,
    calibrate_pi_pulse,
    propagate,
    spectator_phase,
    transfer_spectrum,
)
from atomreg.errors import ConfigError, IntegrationError, ProgramError, RegisterError
from atomreg.fieldmap import AtomGeometry, FieldConfig, axial_detuning, make_geometry

__version__ = "0.1.0"

__all__ = [
    "AtomGeometry",
    "ConfigError",
    "FieldConfig",
    "IntegrationError",
    "ProgramError",
    "PulseShape",
    "RegisterError",
    "TwoLevelState",
    "TwoLevelUnitary",
    "axial_detuning",
    "calibrate_pi_pulse",
    "make_geometry",
    "propagate",
    "spectator_phase",
    "transfer_spectrum",
]
