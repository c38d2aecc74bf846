"""Analysis package: lock-in demodulation, spectra, fits and the analytic model."""

from .dsp import DemodRecord, fit_noise_model, fit_response, lock_in, psd_hann
from .analytic import AnalyticParams, model_curves, sensitivity, squeezed_ratio

__all__ = [
    'DemodRecord', 'fit_noise_model', 'fit_response', 'lock_in', 'psd_hann',
    'AnalyticParams', 'model_curves', 'sensitivity', 'squeezed_ratio',
]
