"""
Closed-form first-order model of the Bell-Bloom magnetometer.

All angular frequencies are rad/s; PSDs are single-sided per Hz in the
demodulated-quadrature units. The rotating-frame gyromagnetic ratio is taken as
-|gamma| because the F_z readout cannot tell the precession sense apart.
"""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import pandas as pd

from config.model import (
    TWO_PI,
    DEFAULT_GAMMA,
    InvalidInputError,
    ZeroSignalError,
    to_angular,
    to_hz,
)
from generators.probe_generator import quadrature_floor
from generators.pump import cycle_mean, harmonic_amplitude


@dataclass(frozen=True)
class AnalyticParams:
    delta_omega: float
    u_mean: float
    gamma: float
    s_sigma: float
    s_shot_sql: float
    xi2: float = 1.0

    def __post_init__(self):
        if not self.delta_omega > 0:
            raise InvalidInputError(f"delta_omega must be positive, got {self.delta_omega}")
        if self.s_sigma < 0 or self.s_shot_sql < 0:
            raise InvalidInputError("noise PSDs must be non-negative")
        if not self.xi2 > 0:
            raise InvalidInputError(f"xi2 must be positive, got {self.xi2}")

    @property
    def s_shot(self):
        return self.xi2 * self.s_shot_sql

    @property
    def zeta2(self):
        if self.s_shot_sql == 0:
            return math.inf
        return self.s_sigma / self.s_shot_sql

    @classmethod
    def from_configs(cls, ensemble, pump, probe):
        """Resonant-operation parameters of a configured magnetometer."""
        delta = ensemble.gamma_rel + cycle_mean(pump)
        f0 = steady_state(ensemble, pump, 0.0)
        gain = probe.gain
        s_sigma = 4.0 * gain**2 * ensemble.equilibrium_variance / delta
        s_shot_sql = quadrature_floor(replace(probe, squeezing_db=0.0, transmission=1.0))
        return cls(delta, gain * abs(f0), -abs(ensemble.gamma), s_sigma, s_shot_sql, probe.xi2)

    @classmethod
    def from_bandwidths(cls, bandwidth_hz, bandwidth_3db_hz, xi2=1.0, u_mean=1.0,
                        gamma=DEFAULT_GAMMA, s_shot_sql=1.0):
        """Parameters reproducing a measured knee and SQL 3 dB bandwidth (both Hz)."""
        if not bandwidth_3db_hz >= bandwidth_hz > 0:
            raise InvalidInputError("3 dB bandwidth must be at least the Lorentzian knee")
        zeta2 = (bandwidth_3db_hz / bandwidth_hz) ** 2 - 1.0
        return cls(to_angular(bandwidth_hz), u_mean, -abs(gamma), zeta2 * s_shot_sql, s_shot_sql, xi2)

    def with_squeezing(self, xi2):
        return replace(self, xi2=xi2)

    def calibrated_to_sensitivity(self, freq_hz, target_asd):
        """Rescale u_mean so that sqrt(S_B) at freq_hz equals target_asd (T/sqrt(Hz))."""
        current = sensitivity(self, to_angular(freq_hz))
        return replace(self, u_mean=self.u_mean * math.sqrt(current) / target_asd)

    def to_dict(self):
        return {
            "delta_omega": self.delta_omega,
            "bandwidth_hz": to_hz(self.delta_omega),
            "u_mean": self.u_mean,
            "gamma": self.gamma,
            "s_sigma": self.s_sigma,
            "s_shot_sql": self.s_shot_sql,
            "zeta2": self.zeta2,
            "xi2": self.xi2,
        }


class Bandwidths(NamedTuple):
    sql_hz: float
    squeezed_hz: float


def steady_state(cfg, pump, detuning):
    """F_plus^(0) = P_plus F_max / (i delta + Gamma + P_bar)."""
    delta = cfg.gamma_rel + cycle_mean(pump)
    if not delta > 0:
        raise InvalidInputError("Gamma + P_bar must be positive for a steady state")
    return harmonic_amplitude(pump) * cfg.f_max / (1j * detuning + delta)


def detuning_for(cfg, pump, b0):
    """delta = omega_L - Omega for a static field b0."""
    return abs(cfg.gamma) * b0 - pump.omega_mod


def dispersive_curve(inputs, b_values):
    """Noise-free steady-state (u, v) across a static-field scan."""
    cfg, pump = inputs.ensemble, inputs.pump
    b_values = np.asarray(b_values, dtype=float)
    f0 = steady_state(cfg, pump, detuning_for(cfg, pump, b_values))
    signal = inputs.probe.gain * f0
    return signal.real, signal.imag


def rotating_frame_matrix(delta_omega, detuning, omega):
    """Fourier-domain operator acting on (Re, Im) of F_plus^(1)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    diag = delta_omega - 1j * omega
    m = np.empty(omega.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = diag
    m[..., 0, 1] = -detuning
    m[..., 1, 0] = detuning
    m[..., 1, 1] = diag
    return m


def first_order_response(params, omega, detuning=0.0, drive=None):
    """Complex (u, v) response at omega by a direct 2x2 solve.

    drive=None applies a unit field perturbation (per tesla, signal units);
    otherwise drive is the (Re, Im) forcing of F_plus^(1), e.g. (0, 1) for
    unit white spin noise on the measured quadrature.
    """
    omega = np.asarray(omega, dtype=float)
    if drive is None:
        # Steady signal at this detuning, u_mean being its resonant value.
        signal = params.u_mean * params.delta_omega / (1j * detuning + params.delta_omega)
        forcing = 1j * params.gamma * signal
        rhs = np.array([forcing.real, forcing.imag], dtype=complex)
    else:
        rhs = np.asarray(drive, dtype=complex).reshape(2)
    m = rotating_frame_matrix(params.delta_omega, detuning, omega)
    rhs = np.broadcast_to(rhs, m.shape[:-1])[..., None]
    solution = np.linalg.solve(m, rhs)[..., 0]
    return solution.reshape(omega.shape + (2,))


def responsivity(params, omega):
    """R(omega) = gamma <u> / (-i omega + delta_omega)."""
    return params.gamma * params.u_mean / (-1j * np.asarray(omega, dtype=float) + params.delta_omega)


def lineshape(params, omega):
    omega = np.asarray(omega, dtype=float)
    return params.delta_omega**2 / (omega**2 + params.delta_omega**2)


def signal_noise_spectrum(params, omega):
    """S_v = S_shot + L(omega) S_sigma."""
    return params.s_shot + lineshape(params, omega) * params.s_sigma


def sensitivity(params, omega):
    """S_B = (delta_omega / gamma <u>)^2 (S_sigma + S_shot / L(omega)) in T^2/Hz."""
    if params.u_mean == 0:
        raise ZeroSignalError("sensitivity is undefined for a zero signal amplitude")
    prefactor = params.delta_omega**2 / (params.gamma**2 * params.u_mean**2)
    return prefactor * (params.s_sigma + params.s_shot / lineshape(params, omega))


def squeezed_ratio(params, omega, form="derived"):
    """S_B(squeezed) / S_B(coherent) at the params' xi2.

    "derived" follows from S_B with S_shot -> xi2 S_shot_sql; "printed" is the
    alternative placement (1 + L xi2 / zeta2) / (1 + L / zeta2).
    """
    shape = lineshape(params, omega)
    zeta2, xi2 = params.zeta2, params.xi2
    if form == "derived":
        if math.isinf(zeta2):
            return np.ones_like(shape)
        return (shape * zeta2 + xi2) / (shape * zeta2 + 1.0)
    if form == "printed":
        if not zeta2 > 0:
            raise InvalidInputError("the printed ratio form needs zeta2 > 0")
        return (1.0 + shape * xi2 / zeta2) / (1.0 + shape / zeta2)
    raise InvalidInputError(f"unknown ratio form '{form}'")


def bandwidth_3db(params):
    """Frequencies (Hz) where S_B doubles its zero-frequency value, coherent and squeezed."""
    zeta2 = params.zeta2
    if math.isinf(zeta2):
        return Bandwidths(math.inf, math.inf)
    sql = params.delta_omega * math.sqrt(zeta2 + 1.0)
    squeezed = params.delta_omega * math.sqrt(zeta2 / params.xi2 + 1.0)
    return Bandwidths(to_hz(sql), to_hz(squeezed))


def crossover_frequencies(params):
    """Frequencies (Hz) where spin noise falls to the shot-noise floor, coherent and squeezed.

    Zero when spin noise never rises above the floor.
    """
    zeta2 = params.zeta2
    if math.isinf(zeta2):
        return Bandwidths(math.inf, math.inf)

    def crossing(ratio):
        return to_hz(params.delta_omega * math.sqrt(ratio - 1.0)) if ratio > 1.0 else 0.0

    return Bandwidths(crossing(zeta2), crossing(zeta2 / params.xi2))


def model_curves(params, freqs_hz, xi2=None):
    """Model spectra on a Hz grid for the coherent and squeezed probe."""
    freqs_hz = np.asarray(freqs_hz, dtype=float)
    omega = TWO_PI * freqs_hz
    sql = params.with_squeezing(1.0)
    squeezed = params.with_squeezing(params.xi2 if xi2 is None else xi2)
    response = np.abs(responsivity(sql, omega) / responsivity(sql, 0.0)) ** 2
    return pd.DataFrame({
        "freq_hz": freqs_hz,
        "s_v_sql": signal_noise_spectrum(sql, omega),
        "s_v_squeezed": signal_noise_spectrum(squeezed, omega),
        "s_b_sql": sensitivity(sql, omega),
        "s_b_squeezed": sensitivity(squeezed, omega),
        "asd_b_sql": np.sqrt(sensitivity(sql, omega)),
        "asd_b_squeezed": np.sqrt(sensitivity(squeezed, omega)),
        "response_norm2": response,
        "lineshape": lineshape(sql, omega),
        "ratio_derived": squeezed_ratio(squeezed, omega, "derived"),
        "ratio_printed": squeezed_ratio(squeezed, omega, "printed"),
    })
