"""
Square-wave optical pumping and its cycle-averaged quantities.
"""

import math

import numpy as np

from config.model import TWO_PI, PumpProgram

__all__ = ["PumpProgram", "pump_rate", "cycle_mean", "harmonic_amplitude", "window_mask"]


def window_mask(prog, t):
    """True where the pump is on: |Omega t - phase_center| <= pi * duty (mod 2 pi)."""
    phase = np.mod(prog.omega_mod * np.asarray(t, dtype=float) - prog.phase_center + math.pi, TWO_PI) - math.pi
    return np.abs(phase) <= math.pi * prog.duty


def pump_rate(prog, t):
    """Instantaneous pumping rate P(t) in 1/s."""
    if prog.duty >= 1.0:
        rate = np.full(np.shape(t), prog.p0, dtype=float)
    else:
        rate = np.where(window_mask(prog, t), prog.p0, 0.0)
    return float(rate) if np.ndim(rate) == 0 else rate


def cycle_mean(prog):
    """P_bar = p0 * duty."""
    return prog.p0 * prog.duty


def harmonic_amplitude(prog):
    """P_plus = (Omega / 2 pi) * integral over one period of P(t) exp(i Omega t)."""
    if prog.duty >= 1.0:
        return 0j
    magnitude = prog.p0 * math.sin(math.pi * prog.duty) / math.pi
    return magnitude * complex(math.cos(prog.phase_center), math.sin(prog.phase_center))
