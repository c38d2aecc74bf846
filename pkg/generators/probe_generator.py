"""
Faraday readout: S2 = G S1 F_z + N_S2 with coherent or squeezed shot noise.
"""

import math
from dataclasses import dataclass

import numpy as np

from config.model import InvalidInputError, ProbeConfig, xi2_from_db
from .streams import PROBE_STREAM, record_stream


@dataclass(frozen=True)
class PolarimeterRecord:
    times: np.ndarray
    s2_samples: np.ndarray
    probe: ProbeConfig
    sample_rate: float
    record_index: int = 0


def shot_floor(probe):
    """Single-sided PSD of the detected S2 noise, xi^2 times the coherent level."""
    return probe.xi2 * probe.shot_psd


def quadrature_floor(probe):
    """Shot-noise level in each lock-in quadrature; mixing with gain 2 doubles a white floor."""
    return 2.0 * shot_floor(probe)


def detected_squeezing(generated_db, transmission):
    """Effective xi^2 after a loss channel of power transmission eta."""
    if not 0 < transmission <= 1:
        raise InvalidInputError("transmission must lie in (0, 1]")
    return transmission * xi2_from_db(generated_db) + (1.0 - transmission)


def transmission_for(generated_db, detected_db):
    """Transmission that degrades generated_db of squeezing to detected_db."""
    generated = xi2_from_db(generated_db)
    detected = xi2_from_db(detected_db)
    if not generated < detected <= 1.0:
        raise InvalidInputError("detected squeezing must be weaker than the generated level")
    return (1.0 - detected) / (1.0 - generated)


def readout(traj, probe=None, rng=None):
    """Polarimeter signal for one trajectory, shot noise drawn from the record's probe stream."""
    if len(traj) == 0:
        raise InvalidInputError("trajectory is empty")
    probe = traj.inputs.probe if probe is None else probe
    signal = probe.gain * traj.fz
    floor = shot_floor(probe)
    if floor > 0:
        if rng is None:
            rng = record_stream(traj.plan.seed, traj.record_index, PROBE_STREAM)
        sigma = math.sqrt(floor * traj.sample_rate / 2.0)
        signal = signal + sigma * rng.standard_normal(signal.shape)
    return PolarimeterRecord(traj.times, signal, probe, traj.sample_rate, traj.record_index)
