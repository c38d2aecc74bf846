"""
Measurement procedures: field-scan calibration, responsivity sweep,
sensitivity spectra with the squeezer on or off, and the backaction A/B test.

Every derived number is reported as a Quantity (value, standard error).
"""

import logging
import math
from dataclasses import dataclass, field, replace

import lmfit
import numpy as np
import pandas as pd
import scipy
from scipy.optimize import brentq

from analysis.analytic import (
    AnalyticParams,
    bandwidth_3db,
    crossover_frequencies,
    dispersive_curve,
    lineshape,
    model_curves,
    responsivity,
    sensitivity,
    squeezed_ratio,
    steady_state,
)
from analysis.dsp import (
    design_lowpass,
    fit_noise_model,
    fit_response,
    noise_model,
    periodogram,
    psd_hann,
    scale_spectrum,
)
from config.model import (
    TWO_PI,
    FieldProgram,
    FitFailedError,
    MissingCalibrationError,
    Quantity,
    ScanError,
    ToneNotResolvedError,
    to_angular,
    to_hz,
)
from generators.data_generator import SyntheticRecordGenerator
from generators.probe_generator import readout
from generators.pump import cycle_mean

logger = logging.getLogger(__name__)

PROBE_FREQUENCY_HZ = 490.0
PROBE_HALF_WIDTH_HZ = 10.0
SCAN_SECONDS = 0.1
SCAN_POINTS = 11
DEFAULT_SQUEEZING_DB = 1.9
DEFAULT_TONE_AMPLITUDE = 0.36e-9
TONE_BINS = 3
BACKACTION_SCALES = (1.0, 10.0, 100.0)
# Raw S2 floor window above f_mod, as fractions of f_mod.
S2_FLOOR_BAND = (0.75, 0.95)


@dataclass
class ExperimentReport:
    scenario: str
    inputs: dict
    derived: dict = field(default_factory=dict)
    spectra: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, name, quantity):
        if not isinstance(quantity, Quantity):
            raise TypeError(f"derived quantity '{name}' must carry a standard error")
        self.derived[name] = Quantity(float(quantity.value), float(quantity.stderr))
        return self.derived[name]

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "inputs": self.inputs,
            "derived": {k: q.to_dict() for k, q in self.derived.items()},
            "spectra": {
                k: {"bins": int(s.freqs.size), "n_averages": int(s.n_averages),
                    "record_seconds": float(s.record_seconds), "units": s.units}
                for k, s in self.spectra.items()
            },
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "notes": list(self.notes),
            "provenance": self.provenance,
        }


def _provenance(config):
    from config import __version__

    return {
        "seed": int(config.plan.seed),
        "profile": config.profile,
        "versions": {
            "bellbloom": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "lmfit": lmfit.__version__,
            "pandas": pd.__version__,
        },
    }


def _new_report(scenario, config):
    return ExperimentReport(scenario, config.to_flat_dict(), provenance=_provenance(config))


def _quiet(inputs):
    """Same configuration with every optical noise source switched off."""
    return inputs.with_probe(replace(inputs.probe, shot_psd=0.0, s3_psd=0.0))


def _bandwidth_hz(config):
    return to_hz(config.ensemble.gamma_rel + cycle_mean(config.pump))


def demod_grid(config, record_seconds=None):
    """Decimated sample rate and record length produced by the lock-in."""
    plan, demod = config.plan, config.demod
    seconds = plan.record_seconds if record_seconds is None else record_seconds
    n_samples = int(round(seconds * plan.sample_rate))
    width = 0.2 * demod.lp_cutoff if demod.transition is None else demod.transition
    taps = design_lowpass(float(plan.sample_rate), float(demod.lp_cutoff), float(width), float(demod.ripple_db))
    n_valid = n_samples - taps.size + 1
    n_dec = len(range(0, n_valid, int(demod.decim)))
    return plan.sample_rate / demod.decim, n_dec


def _mean_with_error(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return Quantity(float(values.mean()), float("nan"))
    return Quantity(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)))


def field_scan_calibration(config, scan=None, mode="noiseless", n_points=SCAN_POINTS,
                           half_width=None, generator=None):
    """Slope dv/dB of the dispersive curve around resonance.

    mode is "analytic" (closed-form steady state), "noiseless" (simulation
    without noise) or "simulate" (full noise). Returns (slope, report).
    """
    inputs = config.inputs
    cfg, pump = inputs.ensemble, inputs.pump
    center = pump.omega_mod / abs(cfg.gamma)
    if scan is None:
        delta = cfg.gamma_rel + cycle_mean(pump)
        half_width = 0.3 * delta / abs(cfg.gamma) if half_width is None else half_width
        scan = np.linspace(center - half_width, center + half_width, n_points)
    scan = np.asarray(scan, dtype=float)
    if scan.size < SCAN_POINTS:
        raise ScanError(f"field scan needs at least {SCAN_POINTS} points, got {scan.size}")
    if not scan.min() < center < scan.max():
        raise ScanError(f"scan [{scan.min():.6g}, {scan.max():.6g}] T does not bracket resonance at {center:.6g} T")

    report = _new_report("calibrate", config)
    if mode == "analytic":
        _, v = dispersive_curve(inputs, scan)
        v_err = np.zeros_like(v)
    elif mode in ("noiseless", "simulate"):
        noisy = mode == "simulate"
        plan = replace(config.plan, record_seconds=SCAN_SECONDS, n_records=scan.size,
                       spin_noise=noisy, backaction=noisy)
        lane_inputs = inputs if noisy else _quiet(inputs)
        generator = generator or SyntheticRecordGenerator()
        records, _ = generator.generate_demodulated(
            plan, lane_inputs, config.demod, list(range(scan.size)),
            [replace(inputs.field, b0=float(b), tone_amplitude=0.0) for b in scan],
        )
        v = np.array([r.v.mean() for r in records])
        v_err = np.array([r.v.std(ddof=1) / math.sqrt(r.v.size) for r in records]) if noisy else np.zeros_like(v)
    else:
        raise ValueError(f"unknown scan mode '{mode}'")

    if not (v.min() < 0.0 < v.max()):
        raise ScanError("dispersive signal does not cross zero inside the scan")

    x_scale = float(np.max(np.abs(scan - center)))
    x = (scan - center) / x_scale
    weights = None
    if np.all(v_err > 0):
        weights = 1.0 / v_err
    coeffs, cov = np.polyfit(x, v, 3, w=weights, cov=True)
    slope = report.add("slope_dv_db", Quantity(coeffs[2] / x_scale, math.sqrt(max(cov[2, 2], 0.0)) / x_scale))
    report.add("v_at_resonance", Quantity(coeffs[3], math.sqrt(max(cov[3, 3], 0.0))))

    params = AnalyticParams.from_configs(cfg, pump, inputs.probe)
    expected = float(responsivity(params, 0.0).real)
    report.add("slope_analytic", Quantity(expected, 0.0))
    report.add("slope_ratio", Quantity(slope.value / expected, slope.stderr / abs(expected)))
    report.tables["field_scan"] = pd.DataFrame({"b_tesla": scan, "v": v, "v_stderr": v_err})
    report.notes.append(f"mode={mode}; cubic fit over {scan.size} points")
    logger.info("field-scan slope %.5g +/- %.2g (analytic %.5g)", slope.value, slope.stderr, expected)
    return slope, report


def default_sweep_frequencies(config, count=13):
    fs_dec, n_dec = demod_grid(config)
    df = fs_dec / n_dec
    low = max(config.demod.band_low, (TONE_BINS + 3) * df)
    return np.geomspace(low, config.demod.band_high, count)


def snap_tones(config, freqs):
    """Move each tone onto a bin centre of the analysis grid, staying inside the band."""
    fs_dec, n_dec = demod_grid(config)
    df = fs_dec / n_dec
    freqs = np.asarray(freqs, dtype=float)
    band_high = config.demod.band_high
    snapped = np.round(freqs / df) * df
    # A tone requested at the band edge may round one bin past it.
    snapped = np.where((snapped > band_high) & (freqs <= band_high), np.floor(freqs / df) * df, snapped)
    for requested, f in zip(freqs, snapped):
        if f < (TONE_BINS + 1) * df:
            raise ToneNotResolvedError(
                f"tone at {requested:g} Hz is within {TONE_BINS + 1} bins of DC; record too short")
        if f > band_high or f >= config.demod.lp_cutoff:
            raise ToneNotResolvedError(f"tone at {requested:g} Hz lies outside the analysis band")
    if np.unique(snapped).size != snapped.size:
        raise ToneNotResolvedError("two tones fall into the same frequency bin")
    return snapped


def tone_power(spec, freq, bins=TONE_BINS):
    """Integrated power of a tone minus the local median baseline."""
    idx = int(round(freq / spec.df))
    lo, hi = idx - bins, idx + bins
    if lo < 1 or hi >= spec.freqs.size:
        raise ToneNotResolvedError(f"tone at {freq:g} Hz is not resolved by {spec.df:.3g} Hz bins")
    peak = spec.psd[lo:hi + 1]
    side = np.concatenate([spec.psd[max(lo - 4 * bins, 1):lo], spec.psd[hi + 1:hi + 1 + 4 * bins]])
    baseline = float(np.median(side)) if side.size else 0.0
    power = float(np.sum(peak - baseline) * spec.df)
    error = float(np.sqrt(np.sum(spec.psd_stderr[lo:hi + 1] ** 2)) * spec.df) if spec.n_averages > 1 else 0.0
    return power, error


def responsivity_sweep(config, freqs=None, tone_amp=DEFAULT_TONE_AMPLITUDE, mode="noiseless", generator=None):
    """Inject tones on B_x, measure the v-quadrature tone power, fit a zero-centred Lorentzian.

    Returns (samples DataFrame, fitted bandwidth in Hz, report).
    """
    freqs = default_sweep_frequencies(config) if freqs is None else np.asarray(freqs, dtype=float)
    snapped = snap_tones(config, freqs)

    inputs = config.inputs
    noisy = mode == "simulate"
    if mode not in ("noiseless", "simulate"):
        raise ValueError(f"unknown sweep mode '{mode}'")
    fields = [FieldProgram(b0=inputs.field.b0, tone_amplitude=tone_amp, tone_frequency=float(f),
                           linear_guard=inputs.field.linear_guard) for f in snapped]
    plan = replace(config.plan, n_records=len(fields), spin_noise=noisy, backaction=noisy)
    generator = generator or SyntheticRecordGenerator()
    records, _ = generator.generate_demodulated(plan, inputs if noisy else _quiet(inputs), config.demod,
                                                list(range(len(fields))), fields)

    powers, errors = [], []
    for rec, f in zip(records, snapped):
        spec = psd_hann(rec.v[None, :], rec.sample_rate)
        power, error = tone_power(spec, f)
        powers.append(power)
        errors.append(error)
    powers = np.array(powers)
    if powers[0] <= 0:
        raise ToneNotResolvedError("lowest-frequency tone has no measurable power")
    normalized = powers / powers[0]
    sigma = np.full_like(normalized, 1e-3) if not noisy else np.maximum(
        np.abs(normalized) * 0.05, 1e-3)
    fit = fit_response(snapped, normalized, sigma)

    configured = _bandwidth_hz(config)
    report = _new_report("respond", config)
    report.add("bandwidth_fit_hz", fit.bandwidth)
    report.add("bandwidth_configured_hz", Quantity(configured, 0.0))
    report.add("bandwidth_ratio", Quantity(fit.bandwidth.value / configured, fit.bandwidth.stderr / configured))
    report.add("tone_power_lowest", Quantity(powers[0], errors[0]))
    report.checks["bandwidth_within_2pct"] = abs(fit.bandwidth.value / configured - 1.0) <= 0.02
    samples = pd.DataFrame({
        "freq_hz": snapped,
        "tone_power": powers,
        "normalized": normalized,
        "model": fit.amplitude.value * fit.bandwidth.value**2 / (snapped**2 + fit.bandwidth.value**2),
    })
    report.tables["responsivity"] = samples
    report.notes.append(f"mode={mode}; tone amplitude {tone_amp:g} T")
    logger.info("responsivity knee %.2f +/- %.2f Hz (configured %.2f Hz)",
                fit.bandwidth.value, fit.bandwidth.stderr, configured)
    return samples, fit.bandwidth, report


def _response_norm2(freqs, bandwidth_hz):
    return bandwidth_hz**2 / (freqs**2 + bandwidth_hz**2)


def _sensitivity_model(fit, slope, bandwidth_hz):
    def model(f):
        f = np.asarray(f, dtype=float)
        return noise_model(f, fit[0], fit[1], fit[2]) / (slope**2 * _response_norm2(f, bandwidth_hz))
    return model


def _doubling_frequency(floor, amplitude, knee, slope, bandwidth_hz):
    """First frequency where the fitted S_B reaches twice its zero-frequency value."""
    model = _sensitivity_model((floor, amplitude, knee), slope, bandwidth_hz)
    target = 2.0 * float(model(0.0))
    upper = max(bandwidth_hz, knee)
    for _ in range(60):
        if model(upper) > target:
            break
        upper *= 2.0
    else:
        raise FitFailedError("sensitivity never doubles; shot-noise floor is zero",
                             {"floor": floor, "amplitude": amplitude})
    return brentq(lambda f: float(model(f)) - target, 0.0, upper, xtol=1e-9 * upper)


def empirical_bandwidth(noise_fit, slope, bandwidth):
    """3 dB bandwidth from the fitted noise model, with first-order error propagation."""
    values = [noise_fit.floor.value, noise_fit.lorentzian_amplitude.value, noise_fit.bandwidth.value,
              slope.value, bandwidth.value]
    errors = [noise_fit.floor.stderr, noise_fit.lorentzian_amplitude.stderr, noise_fit.bandwidth.stderr,
              0.0, bandwidth.stderr]
    f3 = _doubling_frequency(*values)
    variance = 0.0
    for i, (value, error) in enumerate(zip(values, errors)):
        if not error or not math.isfinite(error):
            continue
        shifted = list(values)
        h = 1e-4 * abs(value) if value else 1e-12
        shifted[i] = value + h
        variance += ((_doubling_frequency(*shifted) - f3) / h * error) ** 2
    return Quantity(f3, math.sqrt(variance))


def _band_mean(spec, low, high):
    band = spec.band(low, high)
    if band.freqs.size == 0:
        raise FitFailedError(f"no bins between {low:g} and {high:g} Hz", {})
    value = float(band.psd.mean())
    error = float(np.sqrt(np.sum(band.psd_stderr**2)) / band.freqs.size)
    return Quantity(value, error)


def _asd_at(spec, freq, half_width=PROBE_HALF_WIDTH_HZ):
    power, error = spec.mean_near(freq, half_width)
    asd = math.sqrt(power)
    return Quantity(asd, error / (2.0 * asd) if asd > 0 else float("nan"))


def _resolve_calibration(config, calibration, response, compute_inline, generator):
    if calibration is None or response is None:
        if not compute_inline:
            missing = [name for name, value in (("calibration", calibration), ("response", response))
                       if value is None]
            raise MissingCalibrationError(f"sensitivity run needs {' and '.join(missing)} results")
    if calibration is None:
        calibration, _ = field_scan_calibration(config, mode="noiseless", generator=generator)
    if response is None:
        _, response, _ = responsivity_sweep(config, generator=generator)
    return calibration, response


def sensitivity_run(config, squeeze=False, squeezing_db=None, calibration=None, response=None,
                    compute_inline=True, probe_freqs=(PROBE_FREQUENCY_HZ,), generator=None):
    """Full pipeline: simulate, read out, demodulate, PSD, divide by (dv/dB)^2 |R_hat|^2.

    Returns (magnetic Spectrum in T^2/Hz, report).
    """
    if squeeze:
        level = squeezing_db if squeezing_db is not None else (
            config.probe.squeezing_db or DEFAULT_SQUEEZING_DB)
    else:
        level = 0.0
    calibration, response = _resolve_calibration(config, calibration, response, compute_inline, generator)
    config = config.with_squeezing(level)
    generator = generator or SyntheticRecordGenerator()
    demod = config.demod

    records, _ = generator.generate_demodulated(config.plan, config.inputs, demod)
    s_v = psd_hann([r.v for r in records], records[0].sample_rate).band(demod.band_low, demod.band_high)
    s_u = psd_hann([r.u for r in records], records[0].sample_rate).band(demod.band_low, demod.band_high)
    factor = 1.0 / (calibration.value**2 * _response_norm2(s_v.freqs, response.value))
    s_b = scale_spectrum(s_v, factor, "T^2/Hz")

    report = _new_report("sensitivity", config)
    report.spectra["s_v"] = s_v
    report.spectra["s_u"] = s_u
    report.spectra["s_b"] = s_b
    report.add("squeezing_db", Quantity(level, 0.0))
    report.add("slope_dv_db", calibration)
    report.add("response_bandwidth_hz", response)

    for freq in probe_freqs:
        report.add(f"asd_b_{freq:g}hz", _asd_at(s_b, freq))
    plateau = report.add("plateau_s_b", _band_mean(s_b, demod.band_low, 0.5 * response.value))

    params = AnalyticParams.from_configs(config.ensemble, config.pump, config.probe)
    for freq in probe_freqs:
        predicted = math.sqrt(float(sensitivity(params, to_angular(freq))))
        report.add(f"asd_b_{freq:g}hz_analytic", Quantity(predicted, 0.0))
    plateau_freqs = s_b.band(demod.band_low, 0.5 * response.value).freqs
    plateau_model = float(np.mean(sensitivity(params, TWO_PI * plateau_freqs)))
    report.add("plateau_s_b_analytic", Quantity(plateau_model, 0.0))

    try:
        noise_fit = fit_noise_model(s_v)
        report.add("floor", noise_fit.floor)
        report.add("lorentzian_amplitude", noise_fit.lorentzian_amplitude)
        report.add("bandwidth_fit_hz", noise_fit.bandwidth)
        if noise_fit.floor.value > 0:
            report.add("zeta2_fit", _ratio(noise_fit.lorentzian_amplitude, noise_fit.floor))
            # High-frequency floor over plateau, both in S_B, against the closed form.
            s_b_floor = Quantity(noise_fit.floor.value / calibration.value**2,
                                 noise_fit.floor.stderr / calibration.value**2)
            report.add("floor_to_plateau", _ratio(s_b_floor, plateau))
        report.add("bandwidth_3db_hz", empirical_bandwidth(noise_fit, calibration, response))
    except FitFailedError as e:
        report.notes.append(f"noise-model fit failed: {e}")
    slope_model = float(responsivity(params, 0.0).real)
    report.add("floor_to_plateau_analytic", Quantity(params.s_shot / slope_model**2 / plateau_model, 0.0))
    report.add("bandwidth_3db_hz_analytic", Quantity(bandwidth_3db(params).squeezed_hz, 0.0))
    logger.info("sensitivity run (%.2f dB): plateau %.4g T^2/Hz", level, plateau.value)
    return s_b, report


def _ratio(a, b):
    value = a.value / b.value
    relative = math.hypot(a.stderr / a.value if a.value else 0.0, b.stderr / b.value)
    return Quantity(value, abs(value) * relative)


def squeezing_comparison(config, squeezing_db=None, calibration=None, response=None, generator=None):
    """Paired-seed coherent vs squeezed sensitivity runs."""
    level = squeezing_db if squeezing_db is not None else (config.probe.squeezing_db or DEFAULT_SQUEEZING_DB)
    generator = generator or SyntheticRecordGenerator()
    calibration, response = _resolve_calibration(config, calibration, response, True, generator)
    _, coherent = sensitivity_run(config, False, calibration=calibration, response=response, generator=generator)
    _, squeezed = sensitivity_run(config, True, level, calibration, response, generator=generator)

    report = _new_report("squeezing", config.with_squeezing(level))
    report.spectra["s_b_sql"] = coherent.spectra["s_b"]
    report.spectra["s_b_squeezed"] = squeezed.spectra["s_b"]
    report.spectra["s_v_sql"] = coherent.spectra["s_v"]
    report.spectra["s_v_squeezed"] = squeezed.spectra["s_v"]
    key = f"asd_b_{PROBE_FREQUENCY_HZ:g}hz"
    report.add(f"{key}_sql", coherent.derived[key])
    report.add(f"{key}_squeezed", squeezed.derived[key])
    amplitude = report.add("amplitude_ratio", _ratio(squeezed.derived[key], coherent.derived[key]))
    plateau = report.add("plateau_ratio", _ratio(squeezed.derived["plateau_s_b"], coherent.derived["plateau_s_b"]))

    params = AnalyticParams.from_configs(config.ensemble, config.pump, config.with_squeezing(level).probe)
    omega = to_angular(PROBE_FREQUENCY_HZ)
    expected = math.sqrt(float(squeezed_ratio(params, omega)))
    report.add("amplitude_ratio_analytic", Quantity(expected, 0.0))
    report.add("amplitude_ratio_printed_form", Quantity(math.sqrt(float(squeezed_ratio(params, omega, "printed"))), 0.0))
    report.add("lineshape_at_probe", Quantity(float(lineshape(params, omega)), 0.0))
    plateau_freqs = coherent.spectra["s_b"].band(config.demod.band_low, 0.5 * response.value).freqs
    plateau_omega = TWO_PI * plateau_freqs
    plateau_expected = float(np.mean(sensitivity(params, plateau_omega))
                             / np.mean(sensitivity(params.with_squeezing(1.0), plateau_omega)))
    report.add("plateau_ratio_analytic", Quantity(plateau_expected, 0.0))
    bands = bandwidth_3db(params)
    report.add("bandwidth_ratio_analytic", Quantity(bands.squeezed_hz / bands.sql_hz, 0.0))
    if "bandwidth_3db_hz" in coherent.derived and "bandwidth_3db_hz" in squeezed.derived:
        ratio = report.add("bandwidth_ratio", _ratio(squeezed.derived["bandwidth_3db_hz"],
                                                     coherent.derived["bandwidth_3db_hz"]))
        report.checks["bandwidth_ratio_within_0.05"] = abs(ratio.value - bands.squeezed_hz / bands.sql_hz) <= 0.05
    crossing = crossover_frequencies(params)
    report.add("crossover_sql_hz_analytic", Quantity(crossing.sql_hz, 0.0))
    report.add("crossover_squeezed_hz_analytic", Quantity(crossing.squeezed_hz, 0.0))
    for name, run in (("sql", coherent), ("squeezed", squeezed)):
        fitted = _fitted_crossover(run)
        if fitted is not None:
            report.add(f"crossover_{name}_hz", fitted)
    report.tables["crossover"] = _crossover_table(params, coherent, squeezed)

    report.checks["amplitude_ratio_within_4pct"] = abs(amplitude.value / expected - 1.0) <= 0.04
    report.checks["plateau_not_raised"] = plateau.value <= 1.0 + 2.0 * plateau.stderr
    report.notes.extend(coherent.notes + squeezed.notes)
    logger.info("squeezing %.2f dB: amplitude ratio %.3f (model %.3f)", level, amplitude.value, expected)
    return report


def _record_plateaus(series, sample_rate, low, high):
    """Per-record mean periodogram level between low and high."""
    freqs, psd = periodogram(series, sample_rate)
    mask = (freqs >= low) & (freqs <= high)
    return psd[:, mask].mean(axis=1)


def _paired_ratio(numerator, denominator):
    """Ratio of means of paired samples with a delta-method standard error."""
    value = numerator.mean() / denominator.mean()
    residual = numerator - value * denominator
    n = numerator.size
    error = residual.std(ddof=1) / math.sqrt(n) / denominator.mean() if n > 1 else float("nan")
    return Quantity(float(value), float(error))


def backaction_ab_test(config, scales=BACKACTION_SCALES, generator=None):
    """Scale only the S3 noise and compare Var(F_x) with the low-frequency S_v plateau."""
    generator = generator or SyntheticRecordGenerator()
    inputs = config.inputs
    probe = inputs.probe
    demod = config.demod
    low, high = demod.band_low, 0.5 * _bandwidth_hz(config)

    report = _new_report("abtest", config)
    plateaus, variances, var_errors = {}, [], []
    fingerprints = []
    for scale in scales:
        scaled = inputs.with_probe(replace(probe, s3_psd=probe.s3_psd * scale))
        records, trajectories = generator.generate_demodulated(config.plan, scaled, demod,
                                                               keep_trajectories=True)
        plateaus[scale] = _record_plateaus([r.v for r in records], records[0].sample_rate, low, high)
        per_record = np.array([np.var(t.fx) for t in trajectories])
        var_fx = report.add(f"var_fx_scale_{scale:g}", _mean_with_error(per_record))
        variances.append(var_fx.value)
        var_errors.append(var_fx.stderr)
        report.add(f"plateau_s_v_scale_{scale:g}", _mean_with_error(plateaus[scale]))
        if probe.coupling == 0:
            fingerprints.append(np.concatenate([t.f_samples.ravel() for t in trajectories]))

    reference = scales[0]
    for scale in scales[1:]:
        ratio = report.add(f"plateau_ratio_{scale:g}", _paired_ratio(plateaus[scale], plateaus[reference]))
        report.checks[f"plateau_invariant_{scale:g}"] = abs(ratio.value - 1.0) <= max(0.03, 3.0 * ratio.stderr)

    errs = np.asarray(var_errors)
    if np.all(np.isfinite(errs) & (errs > 0)):
        coeffs, cov = np.polyfit(np.asarray(scales, dtype=float), variances, 1, w=1.0 / errs, cov="unscaled")
        slope_err, intercept_err = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    else:
        coeffs = np.polyfit(np.asarray(scales, dtype=float), variances, 1)
        slope_err = intercept_err = float("nan")
    slope = report.add("var_fx_slope", Quantity(coeffs[0], slope_err))
    report.add("var_fx_intercept", Quantity(coeffs[1], intercept_err))

    delta = config.ensemble.gamma_rel + cycle_mean(config.pump)
    amplitude = abs(steady_state(config.ensemble, config.pump, 0.0))
    expected = probe.coupling**2 * probe.backaction_psd * amplitude**2 / (8.0 * delta)
    report.add("var_fx_slope_expected", Quantity(expected, 0.0))
    report.add("var_fx_equilibrium", Quantity(config.ensemble.equilibrium_variance, 0.0))
    if expected > 0:
        report.checks["var_fx_linear_within_10pct"] = abs(slope.value / expected - 1.0) <= 0.10
    if probe.coupling == 0:
        report.checks["trajectories_identical"] = all(
            np.array_equal(fingerprints[0], fp) for fp in fingerprints[1:])
        report.notes.append("coupling G = 0: S3 noise cannot act on the spins")
    logger.info("backaction A/B: Var(Fx) slope %.4g (expected %.4g)", slope.value, expected)
    return report


def _fitted_crossover(report):
    """Frequency where the fitted Lorentzian falls to the fitted floor, or None."""
    if not all(key in report.derived for key in ("floor", "lorentzian_amplitude", "bandwidth_fit_hz")):
        return None
    if report.derived["floor"].value <= 0:
        return None
    ratio = _ratio(report.derived["lorentzian_amplitude"], report.derived["floor"])
    knee = report.derived["bandwidth_fit_hz"]
    if ratio.value <= 1.0:
        return Quantity(0.0, 0.0)
    root = math.sqrt(ratio.value - 1.0)
    error = math.hypot(root * knee.stderr, knee.value * ratio.stderr / (2.0 * root))
    return Quantity(knee.value * root, error)


def _crossover_table(params, coherent=None, squeezed=None):
    crossing = crossover_frequencies(params)
    fitted = [_fitted_crossover(r) if r is not None else None for r in (coherent, squeezed)]
    return pd.DataFrame({
        "probe": ["coherent", "squeezed"],
        "analytic_hz": [crossing.sql_hz, crossing.squeezed_hz],
        "fitted_hz": [q.value if q is not None else np.nan for q in fitted],
        "fitted_stderr_hz": [q.stderr if q is not None else np.nan for q in fitted],
    })


def polarimeter_spectra(config, trajectories, squeezing_db):
    """Raw S2 spectra around f_mod for the same trajectories read out coherent and squeezed.

    Both readouts draw shot noise from the same per-record stream, so the squeezed
    floor is the coherent one scaled by xi2 sample by sample.
    """
    coherent = config.with_squeezing(0.0).probe
    squeezed = config.with_squeezing(squeezing_db).probe
    fs = config.plan.sample_rate
    f_mod = config.pump.f_mod
    low, high = f_mod - config.demod.band_high, f_mod + config.demod.band_high
    series = {}
    for name, probe in (("s2_sql", coherent), ("s2_squeezed", squeezed)):
        series[name] = [readout(traj, probe).s2_samples for traj in trajectories]
    spectra = {name: psd_hann(samples, fs) for name, samples in series.items()}
    floor_low, floor_high = f_mod + S2_FLOOR_BAND[0] * f_mod, f_mod + S2_FLOOR_BAND[1] * f_mod
    floors = {name: _record_plateaus(samples, fs, floor_low, floor_high) for name, samples in series.items()}
    ratio = _paired_ratio(floors["s2_squeezed"], floors["s2_sql"])
    banded = {name: spec.band(low, high) for name, spec in spectra.items()}
    return banded, ratio, squeezed.xi2


def simulate_spectra(config, generator=None, dump_trajectory=False, squeezing_db=None):
    """Demodulated u and v spectra of a batch of records plus the noise-model fit.

    The same trajectories are also read out raw with a coherent and a squeezed
    probe to give the polarimeter S2 spectra around f_mod.
    """
    level = squeezing_db if squeezing_db is not None else (config.probe.squeezing_db or DEFAULT_SQUEEZING_DB)
    generator = generator or SyntheticRecordGenerator()
    demod = config.demod
    records, trajectories = generator.generate_demodulated(config.plan, config.inputs, demod,
                                                           keep_trajectories=True)
    report = _new_report("simulate", config)
    fs = records[0].sample_rate
    s_u = psd_hann([r.u for r in records], fs).band(demod.band_low, demod.band_high)
    s_v = psd_hann([r.v for r in records], fs).band(demod.band_low, demod.band_high)
    report.spectra["s_u"] = s_u
    report.spectra["s_v"] = s_v
    report.add("u_mean", _mean_with_error([r.u.mean() for r in records]))
    report.add("v_mean", _mean_with_error([r.v.mean() for r in records]))

    params = AnalyticParams.from_configs(config.ensemble, config.pump, config.probe)
    report.add("u_mean_analytic", Quantity(params.u_mean, 0.0))
    report.add("s_sigma_analytic", Quantity(params.s_sigma, 0.0))
    report.add("s_shot_analytic", Quantity(params.s_shot, 0.0))
    try:
        fit = fit_noise_model(s_v)
    except FitFailedError as e:
        report.notes.append(f"noise-model fit failed: {e}")
    else:
        report.add("floor", fit.floor)
        report.add("lorentzian_amplitude", fit.lorentzian_amplitude)
        report.add("bandwidth_fit_hz", fit.bandwidth)
        model = params.s_shot + lineshape(params, TWO_PI * s_v.freqs) * params.s_sigma
        report.tables["s_v_model"] = pd.DataFrame({"freq_hz": s_v.freqs, "psd": s_v.psd, "model": model})
        crossing = _fitted_crossover(report)
        if crossing is not None:
            report.add("crossover_fit_hz", crossing)
    report.add("crossover_analytic_hz", Quantity(crossover_frequencies(params).squeezed_hz, 0.0))

    s2_spectra, floor_ratio, xi2 = polarimeter_spectra(config, trajectories, level)
    report.spectra.update(s2_spectra)
    report.add("s2_floor_ratio", floor_ratio)
    report.add("s2_floor_ratio_analytic", Quantity(xi2, 0.0))
    if dump_trajectory:
        first = trajectories[0]
        report.tables["trajectory"] = pd.DataFrame({
            "t": first.times, "Fx": first.fx, "Fy": first.fy, "Fz": first.fz,
        })
    return report


def analytic_curves(config, freqs=None, points=400, squeezing_db=None):
    """Closed-form spectra on a frequency grid; no simulation involved."""
    level = squeezing_db if squeezing_db is not None else (config.probe.squeezing_db or DEFAULT_SQUEEZING_DB)
    params = AnalyticParams.from_configs(config.ensemble, config.pump, config.probe)
    squeezed_xi2 = config.with_squeezing(level).probe.xi2
    if freqs is None:
        freqs = np.linspace(0.0, config.demod.band_high, points)
    curves = model_curves(params.with_squeezing(1.0), freqs, xi2=squeezed_xi2)

    report = _new_report("analytic", config)
    for key, value in params.to_dict().items():
        report.add(key, Quantity(value, 0.0))
    report.add("squeezing_db", Quantity(level, 0.0))
    report.add("xi2_squeezed", Quantity(squeezed_xi2, 0.0))
    bands = bandwidth_3db(params.with_squeezing(squeezed_xi2))
    report.add("bandwidth_3db_sql_hz", Quantity(bands.sql_hz, 0.0))
    report.add("bandwidth_3db_squeezed_hz", Quantity(bands.squeezed_hz, 0.0))
    crossing = crossover_frequencies(params.with_squeezing(squeezed_xi2))
    report.add("crossover_sql_hz", Quantity(crossing.sql_hz, 0.0))
    report.add("crossover_squeezed_hz", Quantity(crossing.squeezed_hz, 0.0))
    omega = to_angular(PROBE_FREQUENCY_HZ)
    squeezed = params.with_squeezing(squeezed_xi2)
    report.add(f"asd_b_{PROBE_FREQUENCY_HZ:g}hz_sql", Quantity(math.sqrt(float(sensitivity(params.with_squeezing(1.0), omega))), 0.0))
    report.add(f"asd_b_{PROBE_FREQUENCY_HZ:g}hz_squeezed", Quantity(math.sqrt(float(sensitivity(squeezed, omega))), 0.0))
    report.add("amplitude_ratio_analytic", Quantity(math.sqrt(float(squeezed_ratio(squeezed, omega))), 0.0))
    report.tables["model_curves"] = curves
    report.tables["crossover"] = _crossover_table(params.with_squeezing(squeezed_xi2))
    return report
