"""
Brute-force references for the tests.

Nothing here imports the package under test: every oracle is a direct sum,
a quadrature or a closed form written out independently.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

MAX_DFT_LENGTH = 4096


@dataclass(frozen=True)
class OracleResult:
    name: str
    value: float
    expected: float
    tolerance: float
    passed: bool

    @classmethod
    def compare(cls, name, value, expected, rtol):
        value, expected = complex(value), complex(expected)
        scale = max(abs(expected), 1e-300)
        passed = abs(value - expected) <= rtol * scale
        return cls(name, abs(value), abs(expected), rtol, passed)


def naive_dft(series):
    """X_k = sum_n x_n exp(-2 pi i k n / N) by direct summation."""
    x = np.asarray(series, dtype=complex)
    n = x.size
    if n > MAX_DFT_LENGTH:
        raise ValueError(f"naive DFT limited to {MAX_DFT_LENGTH} samples, got {n}")
    out = np.empty(n, dtype=complex)
    for k in range(n):
        total = 0j
        for j in range(n):
            total += x[j] * cmath.exp(-2j * math.pi * k * j / n)
        out[k] = total
    return out


def ou_statistics(gamma_prime, g_nf, horizon=0.0):
    """Stationary variance g/(2 gamma') and autocovariance at lag horizon."""
    if not gamma_prime > 0:
        raise ValueError("decay rate must be positive")
    variance = g_nf / (2.0 * gamma_prime)
    return {
        "variance": variance,
        "decay_rate": gamma_prime,
        "autocovariance": variance * math.exp(-gamma_prime * abs(horizon)),
    }


def first_order_solve(delta_omega, detuning, omega, drive):
    """Cramer's rule for [[a, -d], [d, a]] x = drive with a = delta_omega - i omega."""
    a = delta_omega - 1j * omega
    det = a * a + detuning * detuning
    if det == 0:
        raise ZeroDivisionError("singular rotating-frame system")
    d0, d1 = drive
    return (a * d0 + detuning * d1) / det, (a * d1 - detuning * d0) / det


def pump_fourier(p0, duty, omega_mod, phase_center):
    """(mean rate, first complex harmonic) of a square pump by numerical quadrature."""
    t_lo = (phase_center - math.pi * duty) / omega_mod
    t_hi = (phase_center + math.pi * duty) / omega_mod
    weight = omega_mod / (2.0 * math.pi)
    mean, _ = integrate.quad(lambda t: p0, t_lo, t_hi)
    re, _ = integrate.quad(lambda t: p0 * math.cos(omega_mod * t), t_lo, t_hi, limit=200)
    im, _ = integrate.quad(lambda t: p0 * math.sin(omega_mod * t), t_lo, t_hi, limit=200)
    return weight * mean, weight * complex(re, im)
