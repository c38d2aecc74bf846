"""
Stochastic Bloch equation for one spin population.

    dF/dt = (-gamma B x + G S3 z) x F - Gamma F + P (z F_max - F) + N_F

Each step integrates the linear drift exactly (precession about x, ac-Stark
rotation about z, relaxation and pumping toward z F_max) and adds the exact
Ornstein-Uhlenbeck increment of N_F. To first order in dt this is the
Euler-Maruyama update; it keeps |F| under pure precession and the equilibrium
variance N_A F(F+1)/3 for any step size.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from config.model import (
    IntegrationDivergedError,
    InvalidInputError,
    InvalidPlanError,
    SimPlan,
    SpinInputs,
)
from .pump import cycle_mean, pump_rate
from .streams import SPIN_STREAM, record_stream

logger = logging.getLogger(__name__)

# Steps per vectorised block; fixed so that paired runs draw identical noise.
CHUNK_STEPS = 4096


@dataclass(frozen=True)
class SpinState:
    f_vec: np.ndarray
    t: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        f_vec = np.asarray(self.f_vec, dtype=float).reshape(3)
        if not np.all(np.isfinite(f_vec)):
            raise InvalidInputError("spin state components must be finite")
        object.__setattr__(self, "f_vec", f_vec)


@dataclass(frozen=True)
class SpinTrajectory:
    """Steady-state samples of (F_x, F_y, F_z) for one record."""

    times: np.ndarray
    f_samples: np.ndarray
    plan: SimPlan
    inputs: SpinInputs
    record_index: int = 0
    dt: Optional[float] = None
    sample_rate: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sample_rate", self.plan.sample_rate)

    @property
    def fx(self):
        return self.f_samples[:, 0]

    @property
    def fy(self):
        return self.f_samples[:, 1]

    @property
    def fz(self):
        return self.f_samples[:, 2]

    def __len__(self):
        return len(self.times)


def diffusion_strength(cfg, p_now):
    """Per-axis white-noise intensity 2 (F(F+1)/3) N_A (Gamma + P)."""
    p_now = np.asarray(p_now, dtype=float)
    if np.any(p_now < 0):
        raise InvalidInputError("pumping rate must be non-negative")
    g_nf = 2.0 * cfg.equilibrium_variance * (cfg.gamma_rel + p_now)
    return float(g_nf) if g_nf.ndim == 0 else g_nf


def drift(state, cfg, field_program, pump, probe, s3_now=0.0):
    """Deterministic part of the Bloch equation at state.t."""
    b = field_program.field_at(state.t)
    p = pump_rate(pump, state.t)
    rotation = np.array([-cfg.gamma * b, 0.0, probe.coupling * s3_now])
    f = state.f_vec
    return np.cross(rotation, f) - cfg.gamma_rel * f + p * (np.array([0.0, 0.0, cfg.f_max]) - f)


def _relaxation(rate, dt):
    """(1 - exp(-rate dt)) / rate, equal to dt when rate is zero."""
    safe = np.where(rate > 0, rate, 1.0)
    return np.where(rate > 0, -np.expm1(-rate * dt) / safe, dt)


def step_coefficients(inputs, t_mid, dt):
    """Decay factor, pump drive along z and OU kick std for steps centred on t_mid."""
    cfg = inputs.ensemble
    p = np.asarray(pump_rate(inputs.pump, t_mid), dtype=float)
    rate = cfg.gamma_rel + p
    decay = np.exp(-rate * dt)
    drive = p * cfg.f_max * _relaxation(rate, dt)
    # Variance of the exact OU increment: G (1 - exp(-2 rate dt)) / (2 rate).
    kick_var = diffusion_strength(cfg, p) * _relaxation(2.0 * rate, dt)
    return decay, drive, np.sqrt(kick_var)


def _advance(fx, fy, fz, ca, sa, cb, sb, decay, drive, kx, ky, kz):
    fy, fz = ca * fy - sa * fz, sa * fy + ca * fz
    fx, fy = cb * fx - sb * fy, sb * fx + cb * fy
    return decay * fx + kx, decay * fy + ky, decay * fz + drive + kz


def step(state, inputs, dt, rng=None, spin_noise=True, backaction=True):
    """Advance one state by dt. rng=None integrates the noise-free drift."""
    cfg, probe = inputs.ensemble, inputs.probe
    t_mid = state.t + 0.5 * dt
    decay, drive, kick_std = (float(x) for x in step_coefficients(inputs, t_mid, dt))
    eta = rng.standard_normal(4) if rng is not None else np.zeros(4)

    alpha = -cfg.gamma * float(inputs.field.field_at(t_mid)) * dt
    s3 = math.sqrt(probe.backaction_psd / (2.0 * dt)) * eta[3] if backaction else 0.0
    beta = probe.coupling * s3 * dt
    kicks = kick_std * eta[:3] if spin_noise else np.zeros(3)

    fx, fy, fz = _advance(
        *state.f_vec,
        math.cos(alpha), math.sin(alpha), math.cos(beta), math.sin(beta),
        decay, drive, *kicks,
    )
    f_vec = np.array([fx, fy, fz])
    if not np.all(np.isfinite(f_vec)):
        raise IntegrationDivergedError(state.step_index + 1)
    return SpinState(f_vec, state.t + dt, state.step_index + 1)


def warmup_steps(plan, inputs, dt):
    delta = inputs.ensemble.gamma_rel + cycle_mean(inputs.pump)
    if delta <= 0:
        raise InvalidPlanError("Gamma + P_bar must be positive to reach a steady state")
    return int(math.ceil(plan.warmup_factor / delta / dt))


def integrate_lanes(inputs, fields, plan, dt, n_samples, stride, warm_steps,
                    record_indices, initial=None, spin_noise=None, backaction=None):
    """Integrate independent lanes that share everything but the field.

    Lane i draws its noise from the spin stream of record_indices[i]. Sample j
    is the state after warm_steps + j * stride steps, at time j * stride * dt.
    Returns (times, samples) with samples of shape (lanes, n_samples, 3).
    """
    spin_noise = plan.spin_noise if spin_noise is None else spin_noise
    backaction = plan.backaction if backaction is None else backaction
    n_lanes = len(fields)
    if n_lanes != len(record_indices):
        raise InvalidInputError("one record index per lane is required")

    cfg, probe = inputs.ensemble, inputs.probe
    noisy = spin_noise or backaction
    rngs = [record_stream(plan.seed, idx, SPIN_STREAM) for idx in record_indices] if noisy else []
    s3_std = math.sqrt(probe.backaction_psd / (2.0 * dt)) if backaction else 0.0
    soft_bound = cfg.f_max + 10.0 * math.sqrt(cfg.equilibrium_variance)

    start = np.zeros((n_lanes, 3)) if initial is None else np.broadcast_to(initial, (n_lanes, 3))
    fx, fy, fz = (np.array(start[:, i], dtype=float) for i in range(3))

    samples = np.empty((n_lanes, n_samples, 3))
    n_steps = warm_steps + (n_samples - 1) * stride
    t_warm = warm_steps * dt
    stored = 0
    next_store = warm_steps
    warned = False

    def store(index):
        nonlocal stored, next_store, warned
        if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(fy)) and np.all(np.isfinite(fz))):
            raise IntegrationDivergedError(index)
        samples[:, stored, 0] = fx
        samples[:, stored, 1] = fy
        samples[:, stored, 2] = fz
        if not warned and np.max(fx * fx + fy * fy + fz * fz) > soft_bound**2:
            logger.warning("|F| exceeds F_max plus ten noise widths at step %d", index)
            warned = True
        stored += 1
        next_store += stride

    if next_store == 0:
        store(0)

    m = 0
    while stored < n_samples:
        k = min(CHUNK_STEPS, n_steps - m)
        t_mid = (np.arange(m, m + k) + 0.5) * dt - t_warm
        decay, drive, kick_std = step_coefficients(inputs, t_mid, dt)
        decay = np.broadcast_to(decay, (k,))
        drive = np.broadcast_to(drive, (k,))

        b = np.stack([np.broadcast_to(f.field_at(t_mid), (k,)) for f in fields], axis=1)
        alpha = -cfg.gamma * b * dt
        ca, sa = np.cos(alpha), np.sin(alpha)

        if noisy:
            eta = np.stack([rng.standard_normal((k, 4)) for rng in rngs], axis=1)
        if spin_noise:
            kicks = np.broadcast_to(kick_std, (k,))[:, None, None] * eta[:, :, :3]
            kx, ky, kz = kicks[:, :, 0], kicks[:, :, 1], kicks[:, :, 2]
        else:
            kx = ky = kz = np.zeros((k, 1))
        if backaction:
            beta = probe.coupling * s3_std * dt * eta[:, :, 3]
            cb, sb = np.cos(beta), np.sin(beta)
        else:
            cb, sb = np.ones((k, 1)), np.zeros((k, 1))

        for i in range(k):
            fx, fy, fz = _advance(fx, fy, fz, ca[i], sa[i], cb[i], sb[i],
                                  decay[i], drive[i], kx[i], ky[i], kz[i])
            if m + i + 1 == next_store:
                store(m + i + 1)
        m += k

    times = np.arange(n_samples) * stride * dt
    return times, samples


def simulate_lanes(plan, inputs, record_indices=None, fields=None):
    """Steady-state trajectories for several records integrated side by side."""
    dt = plan.validate_for(inputs.pump.f_mod)
    stride = plan.stride(dt)
    if record_indices is None:
        record_indices = list(range(plan.n_records))
    if fields is None:
        fields = [inputs.field] * len(record_indices)
    warm = warmup_steps(plan, inputs, dt)
    logger.debug("integrating %d lanes: dt=%.3g s, stride=%d, warm-up=%d steps",
                 len(fields), dt, stride, warm)
    times, samples = integrate_lanes(inputs, fields, plan, dt, plan.samples_per_record, stride,
                                     warm, record_indices)
    return [
        SpinTrajectory(times, samples[i], plan, inputs.with_field(fields[i]), int(record_indices[i]), dt)
        for i in range(len(fields))
    ]


def simulate_record(plan, inputs, record_index=0):
    return simulate_lanes(plan, inputs, [record_index])[0]
