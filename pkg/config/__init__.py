"""Configuration package for the Bell-Bloom magnetometer simulator."""

from .model import (
    DEFAULT_GAMMA,
    TWO_PI,
    ConfigError,
    DemodSettings,
    EnsembleConfig,
    FieldProgram,
    FitFailedError,
    IntegrationDivergedError,
    InvalidInputError,
    InvalidPlanError,
    MagnetometerError,
    MissingCalibrationError,
    ProbeConfig,
    PumpProgram,
    Quantity,
    ScanError,
    SimPlan,
    Spectrum,
    SpinInputs,
    ToneNotResolvedError,
    ZeroSignalError,
    derive_larmor,
    resonant_field,
    xi2_from_db,
)
from .settings import RunConfig, load_config, profile_aliases, profile_options

__version__ = "0.1.0"

__all__ = [
    'DEFAULT_GAMMA', 'TWO_PI', 'ConfigError', 'DemodSettings', 'EnsembleConfig', 'FieldProgram',
    'FitFailedError', 'IntegrationDivergedError', 'InvalidInputError', 'InvalidPlanError',
    'MagnetometerError', 'MissingCalibrationError', 'ProbeConfig', 'PumpProgram', 'Quantity',
    'ScanError', 'SimPlan', 'Spectrum', 'SpinInputs', 'ToneNotResolvedError', 'ZeroSignalError',
    'derive_larmor', 'resonant_field', 'xi2_from_db', 'RunConfig', 'load_config',
    'profile_aliases', 'profile_options', '__version__',
]
