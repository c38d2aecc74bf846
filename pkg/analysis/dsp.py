"""
Digital lock-in demodulation, Hann-window PSD estimation and noise-model fits.

Lock-in gain convention: A cos(2 pi f_ref t + phase) demodulates to u = A,
v = 0. A white input of single-sided PSD S therefore appears as 2 S in each
quadrature.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from lmfit import Minimizer, Parameters
from scipy import fft, signal

from config.model import (
    TWO_PI,
    FitFailedError,
    InvalidInputError,
    InvalidPlanError,
    Quantity,
    Spectrum,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DemodRecord:
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    f_ref: float
    phase_ref: float
    sample_rate: float
    record_index: int = 0

    def quadrature(self, name):
        if name not in ("u", "v"):
            raise InvalidInputError(f"unknown quadrature '{name}'")
        return self.u if name == "u" else self.v


@dataclass(frozen=True)
class NoiseModelFit:
    """S_v(f) = floor + amplitude * bw^2 / (f^2 + bw^2), frequencies in Hz."""

    floor: Quantity
    lorentzian_amplitude: Quantity
    bandwidth: Quantity
    redchi: float
    nfev: int

    def model(self, freqs):
        return noise_model(np.asarray(freqs, dtype=float), self.floor.value,
                           self.lorentzian_amplitude.value, self.bandwidth.value)

    def to_dict(self):
        return {
            "floor": self.floor.to_dict(),
            "lorentzian_amplitude": self.lorentzian_amplitude.to_dict(),
            "bandwidth_hz": self.bandwidth.to_dict(),
            "redchi": float(self.redchi),
        }


@dataclass(frozen=True)
class ResponseFit:
    """Zero-centred Lorentzian amplitude * bw^2 / (f^2 + bw^2)."""

    amplitude: Quantity
    bandwidth: Quantity
    redchi: float


@lru_cache(maxsize=32)
def design_lowpass(sample_rate, cutoff, transition, ripple_db=80.0):
    """Linear-phase Kaiser FIR with an odd number of taps and unit DC gain."""
    numtaps, beta = signal.kaiserord(ripple_db, transition / (0.5 * sample_rate))
    if numtaps % 2 == 0:
        numtaps += 1
    taps = signal.firwin(numtaps, cutoff, window=("kaiser", beta), fs=sample_rate)
    taps.setflags(write=False)
    return taps


def lock_in(rec, f_ref, phase=0.0, lp_cutoff=960.0, decim=4, transition=None, ripple_db=80.0):
    """Mix S2 with cos/sin(2 pi f_ref t + phase), low-pass, remove group delay, decimate."""
    fs = rec.sample_rate
    decim = int(decim)
    if 2.0 * f_ref >= fs:
        raise InvalidPlanError(f"reference {f_ref:g} Hz is above Nyquist for {fs:g} Hz sampling")
    if lp_cutoff >= f_ref / 2.0:
        raise InvalidPlanError(f"lp_cutoff {lp_cutoff:g} Hz must stay below f_ref/2 = {f_ref / 2:g} Hz")
    width = 0.2 * lp_cutoff if transition is None else transition
    if decim < 1 or lp_cutoff + width >= fs / decim / 2.0:
        raise InvalidPlanError(
            f"decimation by {decim} leaves a {fs / decim / 2:g} Hz Nyquist band, "
            f"too narrow for a {lp_cutoff:g} Hz low-pass"
        )
    taps = design_lowpass(float(fs), float(lp_cutoff), float(width), float(ripple_db))
    s2 = np.asarray(rec.s2_samples, dtype=float)
    if s2.size < taps.size:
        raise InvalidPlanError(f"record of {s2.size} samples is shorter than the {taps.size}-tap filter")

    arg = TWO_PI * f_ref * rec.times + phase
    u = signal.fftconvolve(2.0 * s2 * np.cos(arg), taps, mode="valid")[::decim]
    v = signal.fftconvolve(2.0 * s2 * np.sin(arg), taps, mode="valid")[::decim]
    delay = (taps.size - 1) // 2
    times = rec.times[delay:delay + s2.size - taps.size + 1][::decim]
    return DemodRecord(times, u, v, float(f_ref), float(phase), fs / decim, rec.record_index)


def demodulate(rec, f_ref, settings):
    """lock_in with a DemodSettings bundle; checks the decimated rate covers the analysis band."""
    fs_dec = rec.sample_rate / int(settings.decim)
    if fs_dec < 4.0 * settings.band_high:
        raise InvalidPlanError(
            f"decimated rate {fs_dec:g} Hz is below 4 x analysis band ({settings.band_high:g} Hz)"
        )
    return lock_in(rec, f_ref, settings.phase, settings.lp_cutoff, settings.decim,
                   settings.transition, settings.ripple_db)


def _as_records(series):
    if isinstance(series, np.ndarray):
        data = np.atleast_2d(np.asarray(series, dtype=float))
        if data.ndim != 2:
            raise InvalidInputError("series must be one record or a stack of records")
        return data
    records = [np.asarray(s, dtype=float) for s in series]
    if not records:
        raise InvalidInputError("no records given")
    if records[0].ndim == 0:
        return np.atleast_2d(np.asarray(records, dtype=float))
    lengths = {r.size for r in records}
    if len(lengths) != 1:
        raise InvalidInputError(f"records differ in length: {sorted(lengths)}")
    return np.vstack(records)


def periodogram(series, sample_rate, window="hann"):
    """Per-record single-sided PSD (records x bins) and the frequency axis."""
    data = _as_records(series)
    n = data.shape[1]
    if n < 2:
        raise InvalidInputError("records need at least two samples")
    w = signal.get_window(window, n)
    x = (data - data.mean(axis=1, keepdims=True)) * w
    spectrum = fft.rfft(x, axis=1)
    psd = np.abs(spectrum) ** 2 / (sample_rate * np.sum(w**2))
    psd[:, 1:] *= 2.0
    if n % 2 == 0:
        psd[:, -1] /= 2.0
    return fft.rfftfreq(n, 1.0 / sample_rate), psd


def psd_hann(series, sample_rate, n_records=None, window="hann", units="signal^2/Hz"):
    """Record-averaged single-sided PSD; white noise of variance s^2 reads 2 s^2 / f_s."""
    data = _as_records(series)
    if n_records is not None and data.shape[0] != n_records:
        raise InvalidInputError(f"expected {n_records} records, got {data.shape[0]}")
    freqs, psd = periodogram(data, sample_rate, window)
    count = psd.shape[0]
    stderr = psd.std(axis=0, ddof=1) / math.sqrt(count) if count > 1 else None
    return Spectrum(freqs, psd.mean(axis=0), data.shape[1] / sample_rate, count, window, stderr, units)


def scale_spectrum(spec, factor, units=None):
    """Spectrum with psd and stderr multiplied by a per-bin factor."""
    factor = np.broadcast_to(np.asarray(factor, dtype=float), spec.psd.shape)
    return Spectrum(spec.freqs, spec.psd * factor, spec.record_seconds, spec.n_averages,
                    spec.window, spec.psd_stderr * factor, units or spec.units)


def noise_model(freqs, floor, amplitude, bandwidth):
    return floor + amplitude * bandwidth**2 / (freqs**2 + bandwidth**2)


def _noise_residual(params, freqs, data, sigma):
    v = params.valuesdict()
    return (noise_model(freqs, v["floor"], v["amplitude"], v["bandwidth"]) - data) / sigma


def _lorentzian_residual(params, freqs, data, sigma):
    v = params.valuesdict()
    return (noise_model(freqs, 0.0, v["amplitude"], v["bandwidth"]) - data) / sigma


def _quantity(param):
    stderr = param.stderr
    return Quantity(float(param.value), float("nan") if stderr is None else float(stderr))


def _diagnostics(result):
    return {
        "message": str(getattr(result, "message", "")),
        "nfev": int(getattr(result, "nfev", 0)),
        "success": bool(getattr(result, "success", False)),
        "params": {k: float(p.value) for k, p in result.params.items()},
    }


def _initial_guesses(freqs, psd):
    high = psd[freqs >= 0.6 * freqs[-1]]
    floor = float(np.median(high)) if high.size else float(psd[-1])
    low = float(np.median(psd[: min(5, psd.size)]))
    amplitude = max(low - floor, 1e-3 * max(floor, 1e-300))
    below = np.nonzero(psd < floor + 0.5 * amplitude)[0]
    bandwidth = float(freqs[below[0]]) if below.size and freqs[below[0]] > 0 else freqs[-1] / 5.0
    return floor, amplitude, bandwidth


def fit_noise_model(spec, band=None):
    """Least-squares fit of floor + Lorentzian to a record-averaged spectrum.

    A first pass weights bins by the data; the second weights them by the
    first-pass model, which is the unbiased error of an averaged periodogram.
    """
    if band is not None:
        spec = spec.band(*band)
    freqs, psd = spec.freqs, spec.psd
    if freqs.size < 4:
        raise FitFailedError("too few bins to fit the noise model", {"bins": int(freqs.size)})
    floor0, amp0, bw0 = _initial_guesses(freqs, psd)
    scale = math.sqrt(max(spec.n_averages, 1))

    params = Parameters()
    params.add("floor", value=floor0, min=0.0)
    params.add("amplitude", value=amp0, min=0.0)
    params.add("bandwidth", value=max(bw0, spec.df), min=spec.df / 10.0, max=10.0 * freqs[-1])

    sigma = np.maximum(psd, 1e-12 * max(float(psd.max()), 1e-300)) / scale
    result = Minimizer(_noise_residual, params, fcn_args=(freqs, psd, sigma)).leastsq()
    if result.success:
        v = result.params.valuesdict()
        sigma = noise_model(freqs, v["floor"], v["amplitude"], v["bandwidth"]) / scale
        sigma = np.maximum(sigma, 1e-12 * max(float(psd.max()), 1e-300))
        result = Minimizer(_noise_residual, result.params, fcn_args=(freqs, psd, sigma)).leastsq()
    if not result.success:
        raise FitFailedError("noise-model fit did not converge", _diagnostics(result))

    floor = _quantity(result.params["floor"])
    amplitude = _quantity(result.params["amplitude"])
    bandwidth = _quantity(result.params["bandwidth"])
    unidentifiable = (
        not result.errorbars
        or not (math.isfinite(amplitude.stderr) and math.isfinite(bandwidth.stderr))
        or amplitude.value <= 1e-9 * max(floor.value, 1e-300)
        or amplitude.value < 3.0 * amplitude.stderr
        or bandwidth.stderr > bandwidth.value
    )
    if unidentifiable:
        raise FitFailedError("bandwidth unidentifiable: Lorentzian amplitude consistent with zero",
                             _diagnostics(result))
    if freqs[-1] < 5.0 * bandwidth.value:
        logger.warning("spectrum ends at %.4g Hz, less than 5x the fitted knee %.4g Hz",
                       freqs[-1], bandwidth.value)
    logger.debug("noise fit: floor=%.4g amp=%.4g bw=%.4g Hz", floor.value, amplitude.value, bandwidth.value)
    return NoiseModelFit(floor, amplitude, bandwidth, float(result.redchi), int(result.nfev))


def fit_response(freqs, values, sigma=None):
    """Fit a Lorentzian centred at zero frequency to response samples."""
    freqs = np.asarray(freqs, dtype=float)
    values = np.asarray(values, dtype=float)
    if freqs.size < 3 or freqs.size != values.size:
        raise FitFailedError("need at least three response samples of matching length",
                             {"bins": int(freqs.size)})
    sigma = np.full_like(values, 0.01 * float(np.max(np.abs(values)))) if sigma is None else np.asarray(sigma)
    below = np.nonzero(values < 0.5 * values[0])[0]
    bw0 = freqs[below[0]] if below.size else freqs[-1]

    params = Parameters()
    params.add("amplitude", value=float(values[0]), min=0.0)
    params.add("bandwidth", value=float(bw0), min=1e-6 * float(freqs[-1]))
    result = Minimizer(_lorentzian_residual, params, fcn_args=(freqs, values, sigma)).leastsq()
    if not result.success or not result.errorbars:
        raise FitFailedError("Lorentzian response fit failed", _diagnostics(result))
    return ResponseFit(_quantity(result.params["amplitude"]), _quantity(result.params["bandwidth"]),
                       float(result.redchi))
