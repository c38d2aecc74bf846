"""Experiments package for the simulated measurement procedures."""

from .runner import (
    ExperimentReport,
    analytic_curves,
    backaction_ab_test,
    field_scan_calibration,
    responsivity_sweep,
    sensitivity_run,
    simulate_spectra,
    squeezing_comparison,
)

__all__ = [
    'ExperimentReport', 'analytic_curves', 'backaction_ab_test', 'field_scan_calibration', 'responsivity_sweep',
    'sensitivity_run', 'simulate_spectra', 'squeezing_comparison',
]
