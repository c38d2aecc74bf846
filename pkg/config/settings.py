"""
Configuration settings for the magnetometer simulator

Named parameter profiles plus the flat JSON config loader. Every key is a
decimal SI value; precedence is CLI flag > config file > profile.
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .model import (
    TWO_PI,
    DEFAULT_GAMMA,
    ConfigError,
    DemodSettings,
    EnsembleConfig,
    FieldProgram,
    MagnetometerError,
    ProbeConfig,
    PumpProgram,
    SimPlan,
    SpinInputs,
    resonant_field,
)

logger = logging.getLogger(__name__)

# Bandwidth pair reported for the coherent probe: knee 170 Hz, 3 dB point 275 Hz.
REFERENCE_ZETA2 = (275.0 / 170.0) ** 2 - 1.0

# Profile dictionaries share the flat key schema of the config file.
profile_options = {
    "desk": {
        "label": "Desk scale (f_mod = 2 kHz, same dimensionless ratios)",
        "atom_count": 1.0e6,
        "spin_f": 1.0,
        "gamma": DEFAULT_GAMMA,
        "gamma_rel": math.pi * 170.0,
        "b0": None,
        "tone_amplitude": 0.0,
        "tone_frequency": 0.0,
        "tone_phase": 0.0,
        "p0": 10.0 * math.pi * 170.0,
        "duty": 0.1,
        "f_mod": 2.0e3,
        "pump_phase": 0.0,
        "s1_flux": 250.0,
        "coupling": 4.0e-3,
        "shot_psd": None,
        "s3_psd": None,
        "squeezing_db": 0.0,
        "transmission": 1.0,
        "zeta2": REFERENCE_ZETA2,
        "dt": None,
        "record_seconds": 0.5,
        "n_records": 100,
        "seed": 20211015,
        "sample_rate": 16.0e3,
        "warmup_factor": 10.0,
        "lp_cutoff": 960.0,
        "decim": 4,
        "demod_phase": 0.0,
        "band_low": 10.0,
        "band_high": 850.0,
    },
    "lab": {
        "label": "Laboratory operating point (f_mod = 30.164 kHz, B0 = 4.3 uT)",
        "atom_count": 1.0e6,
        "spin_f": 1.0,
        "gamma": DEFAULT_GAMMA,
        "gamma_rel": math.pi * 170.0,
        "b0": 4.3e-6,
        "tone_amplitude": 0.0,
        "tone_frequency": 0.0,
        "tone_phase": 0.0,
        "p0": 10.0 * math.pi * 170.0,
        "duty": 0.1,
        "f_mod": 30.164e3,
        "pump_phase": 0.0,
        "s1_flux": 250.0,
        "coupling": 4.0e-3,
        "shot_psd": None,
        "s3_psd": None,
        "squeezing_db": 0.0,
        "transmission": 1.0,
        "zeta2": REFERENCE_ZETA2,
        "dt": None,
        "record_seconds": 0.5,
        "n_records": 100,
        "seed": 20211015,
        "sample_rate": 125.0e3,
        "warmup_factor": 10.0,
        "lp_cutoff": 3.0e3,
        "decim": 10,
        "demod_phase": 0.0,
        "band_low": 10.0,
        "band_high": 2.4e3,
    },
}

# Alternative names accepted wherever a profile is chosen.
profile_aliases = {"paper": "lab"}

CONFIG_KEYS = frozenset(k for k in profile_options["desk"] if k != "label")


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI run needs: physics inputs, sampling plan, lock-in settings."""

    inputs: SpinInputs
    plan: SimPlan
    demod: DemodSettings
    profile: str = "desk"

    @property
    def ensemble(self):
        return self.inputs.ensemble

    @property
    def field(self):
        return self.inputs.field

    @property
    def pump(self):
        return self.inputs.pump

    @property
    def probe(self):
        return self.inputs.probe

    def with_squeezing(self, squeezing_db):
        return replace(self, inputs=self.inputs.with_probe(replace(self.probe, squeezing_db=squeezing_db)))

    def with_plan(self, **changes):
        return replace(self, plan=replace(self.plan, **changes))

    def to_flat_dict(self):
        """Flat key/value snapshot in the config-file schema."""
        e, f, p, q = self.ensemble, self.field, self.pump, self.probe
        return {
            "atom_count": e.atom_count,
            "spin_f": e.spin_f,
            "gamma": e.gamma,
            "gamma_rel": e.gamma_rel,
            "b0": f.b0,
            "tone_amplitude": f.tone_amplitude,
            "tone_frequency": f.tone_frequency,
            "tone_phase": f.tone_phase,
            "p0": p.p0,
            "duty": p.duty,
            "f_mod": p.f_mod,
            "pump_phase": p.phase_center,
            "s1_flux": q.s1_flux,
            "coupling": q.coupling,
            "shot_psd": q.shot_psd,
            "s3_psd": q.s3_psd,
            "squeezing_db": q.squeezing_db,
            "transmission": q.transmission,
            "dt": self.plan.dt,
            "record_seconds": self.plan.record_seconds,
            "n_records": self.plan.n_records,
            "seed": self.plan.seed,
            "sample_rate": self.plan.sample_rate,
            "warmup_factor": self.plan.warmup_factor,
            "lp_cutoff": self.demod.lp_cutoff,
            "decim": self.demod.decim,
            "demod_phase": self.demod.phase,
            "band_low": self.demod.band_low,
            "band_high": self.demod.band_high,
            "profile": self.profile,
        }


def spin_noise_psd(values):
    """Demodulated low-frequency spin-noise level 4 (G S1)^2 N_A F(F+1) / (3 (Gamma + P_bar))."""
    gain = values["coupling"] * values["s1_flux"]
    variance = values["atom_count"] * values["spin_f"] * (values["spin_f"] + 1.0) / 3.0
    delta_omega = values["gamma_rel"] + values["p0"] * values["duty"]
    return 4.0 * gain**2 * variance / delta_omega


def build_run_config(values, profile="desk"):
    """Assemble a RunConfig from a flat dict in the config-file schema."""
    values = dict(values)
    f_mod = float(values["f_mod"])
    ensemble = EnsembleConfig(
        atom_count=float(values["atom_count"]),
        spin_f=float(values["spin_f"]),
        gamma=float(values["gamma"]),
        gamma_rel=float(values["gamma_rel"]),
    )
    b0 = values["b0"]
    if b0 is None:
        b0 = resonant_field(ensemble, TWO_PI * f_mod)
    field = FieldProgram(
        b0=float(b0),
        tone_amplitude=float(values["tone_amplitude"]),
        tone_frequency=float(values["tone_frequency"]),
        tone_phase=float(values["tone_phase"]),
    )
    pump = PumpProgram(
        p0=float(values["p0"]),
        duty=float(values["duty"]),
        omega_mod=TWO_PI * f_mod,
        phase_center=float(values["pump_phase"]),
    )
    shot_psd = values["shot_psd"]
    if shot_psd is None:
        zeta2 = float(values["zeta2"])
        if zeta2 <= 0:
            raise ConfigError("zeta2 must be positive when shot_psd is not given")
        # The lock-in doubles a white floor in each quadrature.
        shot_psd = spin_noise_psd(values) / (2.0 * zeta2)
    probe = ProbeConfig(
        s1_flux=float(values["s1_flux"]),
        coupling=float(values["coupling"]),
        shot_psd=float(shot_psd),
        squeezing_db=float(values["squeezing_db"]),
        s3_psd=None if values["s3_psd"] is None else float(values["s3_psd"]),
        transmission=float(values["transmission"]),
    )
    plan = SimPlan(
        record_seconds=float(values["record_seconds"]),
        n_records=int(values["n_records"]),
        seed=int(values["seed"]),
        sample_rate=float(values["sample_rate"]),
        dt=None if values["dt"] is None else float(values["dt"]),
        warmup_factor=float(values["warmup_factor"]),
    )
    demod = DemodSettings(
        lp_cutoff=float(values["lp_cutoff"]),
        decim=int(values["decim"]),
        phase=float(values["demod_phase"]),
        band_low=float(values["band_low"]),
        band_high=float(values["band_high"]),
    )
    plan.validate_for(f_mod)
    return RunConfig(SpinInputs(ensemble, field, pump, probe), plan, demod, profile)


def read_config_file(path):
    """Parse a flat JSON config file, rejecting unknown keys."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a flat JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    nested = [k for k, v in data.items() if isinstance(v, (dict, list))]
    if nested:
        raise ConfigError(f"config values must be scalars: {', '.join(nested)}")
    return data


def load_config(path=None, profile="desk", overrides=None):
    """Profile defaults, then the config file, then explicit overrides."""
    profile = profile_aliases.get(profile, profile)
    if profile not in profile_options:
        names = [*profile_options, *profile_aliases]
        raise ConfigError(f"unknown profile '{profile}' (choose from {', '.join(names)})")
    values = {k: v for k, v in profile_options[profile].items() if k != "label"}
    if path is not None:
        file_values = read_config_file(path)
        logger.debug("config file %s sets %s", path, sorted(file_values))
        values.update(file_values)
    for key, value in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown override '{key}'")
        if value is not None:
            values[key] = value
    try:
        return build_run_config(values, profile)
    except ConfigError:
        raise
    except MagnetometerError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
