"""
Physical parameters, unit conventions and shared value types.

Internal angular frequencies are rad/s; spectra are reported on Hz axes.
The 2*pi conversion happens only in ``to_angular`` / ``to_hz``.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

TWO_PI = 2.0 * math.pi

# Back-derived from B0 = 4.3 uT and f_mod = 30.164 kHz; negative for 87Rb.
DEFAULT_GAMMA = -TWO_PI * 7.015e9


class MagnetometerError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidInputError(MagnetometerError, ValueError):
    pass


class InvalidPlanError(MagnetometerError, ValueError):
    pass


class ConfigError(MagnetometerError, ValueError):
    pass


class IntegrationDivergedError(MagnetometerError):
    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"integration diverged at step {step_index}")


class FitFailedError(MagnetometerError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ScanError(MagnetometerError):
    pass


class ToneNotResolvedError(MagnetometerError):
    pass


class MissingCalibrationError(MagnetometerError):
    pass


class ZeroSignalError(MagnetometerError, ValueError):
    pass


class Quantity(NamedTuple):
    """A derived value with its standard error."""

    value: float
    stderr: float

    def to_dict(self):
        return {"value": float(self.value), "stderr": float(self.stderr)}


def to_angular(freq_hz):
    """Hz -> rad/s."""
    return TWO_PI * np.asarray(freq_hz, dtype=float) if np.ndim(freq_hz) else TWO_PI * float(freq_hz)


def to_hz(omega):
    """rad/s -> Hz."""
    return np.asarray(omega, dtype=float) / TWO_PI if np.ndim(omega) else float(omega) / TWO_PI


def _require(condition, message, error=InvalidInputError):
    if not condition:
        raise error(message)


@dataclass(frozen=True)
class EnsembleConfig:
    """Atomic parameters of a single spin population."""

    atom_count: float = 1.0e6
    spin_f: float = 1.0
    gamma: float = DEFAULT_GAMMA
    gamma_rel: float = 0.0
    f_max: float = field(init=False)

    def __post_init__(self):
        _require(self.atom_count > 0, f"atom_count must be positive, got {self.atom_count}")
        _require(self.spin_f > 0, f"spin_f must be positive, got {self.spin_f}")
        _require(self.gamma_rel >= 0, f"gamma_rel must be non-negative, got {self.gamma_rel}")
        _require(math.isfinite(self.gamma) and self.gamma != 0, "gamma must be finite and non-zero")
        object.__setattr__(self, "f_max", self.atom_count * self.spin_f)

    @property
    def equilibrium_variance(self):
        """Per-axis variance N_A F(F+1)/3 of an unpolarized ensemble."""
        return self.atom_count * self.spin_f * (self.spin_f + 1.0) / 3.0


@dataclass(frozen=True)
class FieldProgram:
    """Static field B0 along x plus an optional small sinusoidal tone."""

    b0: float
    tone_amplitude: float = 0.0
    tone_frequency: float = 0.0
    tone_phase: float = 0.0
    linear_guard: float = 0.01

    def __post_init__(self):
        _require(math.isfinite(self.b0), "b0 must be finite")
        _require(self.tone_frequency >= 0, "tone_frequency must be non-negative")
        _require(
            abs(self.tone_amplitude) <= self.linear_guard * abs(self.b0),
            f"tone amplitude {self.tone_amplitude:g} T exceeds {self.linear_guard:g} x |B0| = "
            f"{self.linear_guard * abs(self.b0):g} T (outside linear response)",
        )

    def field_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.tone_amplitude == 0.0:
            return np.full_like(t, self.b0) if t.ndim else float(self.b0)
        return self.b0 + self.tone_amplitude * np.cos(TWO_PI * self.tone_frequency * t + self.tone_phase)


@dataclass(frozen=True)
class PumpProgram:
    """Square-wave modulated optical pumping; operations live in generators.pump."""

    p0: float
    duty: float = 0.1
    omega_mod: float = TWO_PI * 2.0e3
    phase_center: float = 0.0

    def __post_init__(self):
        _require(self.p0 >= 0, f"p0 must be non-negative, got {self.p0}")
        _require(0 < self.duty <= 1, f"duty must lie in (0, 1], got {self.duty}")
        _require(self.omega_mod > 0, "omega_mod must be positive")

    @property
    def f_mod(self):
        return self.omega_mod / TWO_PI

    @property
    def period(self):
        return TWO_PI / self.omega_mod


@dataclass(frozen=True)
class ProbeConfig:
    """Probe light: Faraday gain, optical noise level and squeezing."""

    s1_flux: float
    coupling: float
    shot_psd: float
    squeezing_db: float = 0.0
    s3_psd: Optional[float] = None
    transmission: float = 1.0
    xi2: float = field(init=False)

    def __post_init__(self):
        _require(self.shot_psd >= 0, "shot_psd must be non-negative")
        _require(math.isfinite(self.squeezing_db) and self.squeezing_db >= 0,
                 f"squeezing_db must be finite and >= 0, got {self.squeezing_db}")
        _require(0 < self.transmission <= 1, "transmission must lie in (0, 1]")
        if self.s3_psd is None:
            object.__setattr__(self, "s3_psd", self.shot_psd)
        _require(self.s3_psd >= 0, "s3_psd must be non-negative")
        generated = xi2_from_db(self.squeezing_db)
        object.__setattr__(self, "xi2", self.transmission * generated + (1.0 - self.transmission))

    @property
    def gain(self):
        """G * S1: signal units per unit of F_z."""
        return self.coupling * self.s1_flux

    @property
    def anti_squeezing(self):
        return 1.0 / self.xi2

    @property
    def backaction_psd(self):
        """Single-sided PSD of the S3 fluctuations driving the ac-Stark term."""
        return self.s3_psd * self.anti_squeezing


@dataclass(frozen=True)
class SpinInputs:
    """The configs one spin population is driven by."""

    ensemble: EnsembleConfig
    field: FieldProgram
    pump: PumpProgram
    probe: ProbeConfig

    def with_field(self, field_program):
        return SpinInputs(self.ensemble, field_program, self.pump, self.probe)

    def with_probe(self, probe):
        return SpinInputs(self.ensemble, self.field, self.pump, probe)

    def with_pump(self, pump):
        return SpinInputs(self.ensemble, self.field, pump, self.probe)


@dataclass(frozen=True)
class SimPlan:
    """Sampling and Monte-Carlo plan for one batch of records."""

    record_seconds: float = 0.5
    n_records: int = 100
    seed: int = 20211015
    sample_rate: float = 16.0e3
    dt: Optional[float] = None
    warmup_factor: float = 10.0
    spin_noise: bool = True
    backaction: bool = True

    def __post_init__(self):
        _require(self.record_seconds > 0, "record_seconds must be positive", InvalidPlanError)
        _require(self.n_records >= 1, "n_records must be >= 1", InvalidPlanError)
        _require(self.sample_rate > 0, "sample_rate must be positive", InvalidPlanError)
        _require(self.warmup_factor >= 5, "warm-up must cover at least 5/(Gamma+P)", InvalidPlanError)
        _require(0 <= int(self.seed) < 2**64, "seed must be an unsigned 64-bit integer", InvalidPlanError)
        n = self.record_seconds * self.sample_rate
        _require(abs(n - round(n)) < 1e-6, "record_seconds * sample_rate must be an integer", InvalidPlanError)

    @property
    def samples_per_record(self):
        return int(round(self.record_seconds * self.sample_rate))

    def resolved_dt(self, f_mod):
        if self.dt is not None:
            return float(self.dt)
        return 1.0 / (self.sample_rate * math.ceil(200.0 * f_mod / self.sample_rate))

    def stride(self, dt):
        """Integrator steps per stored sample."""
        ratio = 1.0 / (dt * self.sample_rate)
        if abs(ratio - round(ratio)) > 1e-6 * ratio or round(ratio) < 1:
            raise InvalidPlanError(f"dt = {dt:g} s does not divide the sample period 1/{self.sample_rate:g} s")
        return int(round(ratio))

    def validate_for(self, f_mod):
        dt = self.resolved_dt(f_mod)
        if dt > 1.0 / (100.0 * f_mod) * (1 + 1e-12):
            raise InvalidPlanError(f"dt = {dt:g} s exceeds 1/(100 f_mod) = {1.0 / (100.0 * f_mod):g} s")
        if self.sample_rate < 4.0 * f_mod:
            raise InvalidPlanError(f"sample_rate {self.sample_rate:g} Hz is below 4 f_mod = {4 * f_mod:g} Hz")
        self.stride(dt)
        return dt


@dataclass(frozen=True)
class DemodSettings:
    """Lock-in and analysis-band settings (frequencies in Hz)."""

    lp_cutoff: float = 960.0
    decim: int = 4
    phase: float = 0.0
    band_low: float = 10.0
    band_high: float = 850.0
    transition: Optional[float] = None
    ripple_db: float = 80.0

    def __post_init__(self):
        _require(self.lp_cutoff > 0, "lp_cutoff must be positive", InvalidPlanError)
        _require(int(self.decim) >= 1, "decim must be >= 1", InvalidPlanError)
        _require(0 <= self.band_low < self.band_high, "analysis band must satisfy 0 <= low < high", InvalidPlanError)


@dataclass(frozen=True)
class Spectrum:
    """Single-sided PSD with record-averaging metadata."""

    freqs: np.ndarray
    psd: np.ndarray
    record_seconds: float
    n_averages: int = 1
    window: str = "hann"
    psd_stderr: Optional[np.ndarray] = None
    units: str = "signal^2/Hz"

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        psd = np.asarray(self.psd, dtype=float)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "psd", psd)
        stderr = np.zeros_like(psd) if self.psd_stderr is None else np.asarray(self.psd_stderr, dtype=float)
        object.__setattr__(self, "psd_stderr", stderr)
        _require(freqs.shape == psd.shape == stderr.shape, "freqs, psd and psd_stderr must have equal length")
        _require(np.all(psd >= 0), "psd must be non-negative")
        if freqs.size > 1:
            df = np.diff(freqs)
            expected = 1.0 / self.record_seconds
            _require(np.allclose(df, expected, rtol=1e-6, atol=0),
                     "frequency axis must be uniform with spacing 1/record_seconds")

    @property
    def df(self):
        return 1.0 / self.record_seconds

    def band(self, low, high):
        """Sub-spectrum with low <= f <= high."""
        mask = (self.freqs >= low) & (self.freqs <= high)
        return Spectrum(self.freqs[mask], self.psd[mask], self.record_seconds, self.n_averages,
                        self.window, self.psd_stderr[mask], self.units)

    def mean_near(self, freq, half_width):
        """Mean PSD over bins within half_width of freq, with its standard error."""
        mask = np.abs(self.freqs - freq) <= half_width
        if not np.any(mask):
            raise InvalidInputError(f"no bins within {half_width:g} Hz of {freq:g} Hz")
        value = float(np.mean(self.psd[mask]))
        err = float(np.sqrt(np.sum(self.psd_stderr[mask] ** 2)) / mask.sum())
        return value, err


def derive_larmor(cfg, field_program):
    """Larmor angular frequency |gamma| * B0 in rad/s."""
    if not field_program.b0 > 0:
        raise InvalidInputError(f"B0 must be positive to define a Larmor frequency, got {field_program.b0}")
    return abs(cfg.gamma) * field_program.b0


def xi2_from_db(db):
    """Squeezing parameter from a noise reduction in dB."""
    if not math.isfinite(db):
        raise InvalidInputError(f"squeezing level must be finite, got {db}")
    return 10.0 ** (-db / 10.0)


def resonant_field(cfg, omega_mod):
    """B0 that puts the Larmor frequency on the pump modulation."""
    return omega_mod / abs(cfg.gamma)
