import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from config.model import (
    DEFAULT_GAMMA,
    TWO_PI,
    ConfigError,
    EnsembleConfig,
    FieldProgram,
    InvalidInputError,
    InvalidPlanError,
    ProbeConfig,
    PumpProgram,
    Quantity,
    SimPlan,
    Spectrum,
    derive_larmor,
    resonant_field,
    to_angular,
    to_hz,
    xi2_from_db,
)
from config.settings import REFERENCE_ZETA2, load_config, profile_options, spin_noise_psd


class TestUnits:
    @given(st.floats(min_value=0.0, max_value=1e9, allow_nan=False))
    def test_hz_angular_round_trip(self, f):
        assert to_hz(to_angular(f)) == pytest.approx(f, rel=1e-12, abs=1e-300)
        assert to_angular(f) == pytest.approx(TWO_PI * f, rel=1e-15)

    def test_arrays(self):
        freqs = np.array([0.0, 170.0, 2.0e3])
        np.testing.assert_allclose(to_hz(to_angular(freqs)), freqs, rtol=1e-15)


class TestEnsemble:
    def test_derived_fields(self):
        cfg = EnsembleConfig(atom_count=2.0e6, spin_f=2.0)
        assert cfg.f_max == 4.0e6
        assert cfg.equilibrium_variance == pytest.approx(2.0e6 * 6.0 / 3.0)

    @pytest.mark.parametrize("kwargs", [
        {"atom_count": 0.0},
        {"spin_f": -1.0},
        {"gamma_rel": -1.0},
        {"gamma": 0.0},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            EnsembleConfig(**kwargs)

    def test_default_gamma_is_negative(self):
        assert DEFAULT_GAMMA == pytest.approx(-TWO_PI * 7.015e9)


class TestFieldProgram:
    def test_tone_within_linear_guard(self):
        prog = FieldProgram(b0=1e-6, tone_amplitude=5e-9, tone_frequency=100.0)
        t = np.array([0.0, 0.0025])
        np.testing.assert_allclose(prog.field_at(t), [1e-6 + 5e-9, 1e-6])

    def test_tone_outside_linear_guard(self):
        with pytest.raises(InvalidInputError, match="linear response"):
            FieldProgram(b0=1e-6, tone_amplitude=2e-8, tone_frequency=100.0)

    def test_static_field(self):
        assert FieldProgram(b0=3e-7).field_at(0.1) == 3e-7

    def test_larmor(self):
        cfg = EnsembleConfig()
        assert derive_larmor(cfg, FieldProgram(b0=4.3e-6)) == pytest.approx(TWO_PI * 7.015e9 * 4.3e-6)
        with pytest.raises(InvalidInputError):
            derive_larmor(cfg, FieldProgram(b0=-1e-6))

    def test_resonant_field(self):
        cfg = EnsembleConfig()
        b0 = resonant_field(cfg, TWO_PI * 2.0e3)
        assert derive_larmor(cfg, FieldProgram(b0=b0)) == pytest.approx(TWO_PI * 2.0e3)


class TestProbe:
    def test_squeezing_level(self):
        probe = ProbeConfig(s1_flux=1.0, coupling=1.0, shot_psd=2.0, squeezing_db=1.9)
        assert probe.xi2 == pytest.approx(0.6457, abs=1e-4)
        assert probe.s3_psd == 2.0
        assert probe.backaction_psd == pytest.approx(2.0 / probe.xi2)

    def test_loss_mixes_in_vacuum(self):
        probe = ProbeConfig(s1_flux=1.0, coupling=1.0, shot_psd=1.0, squeezing_db=3.0, transmission=0.5)
        assert probe.xi2 == pytest.approx(0.5 * xi2_from_db(3.0) + 0.5)

    @pytest.mark.parametrize("kwargs", [
        {"shot_psd": -1.0},
        {"shot_psd": 1.0, "squeezing_db": -0.5},
        {"shot_psd": 1.0, "squeezing_db": math.inf},
        {"shot_psd": 1.0, "transmission": 0.0},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            ProbeConfig(s1_flux=1.0, coupling=1.0, **kwargs)

    @given(st.floats(min_value=0.0, max_value=20.0), st.floats(min_value=0.01, max_value=1.0))
    def test_xi2_between_squeezed_and_coherent(self, db, eta):
        probe = ProbeConfig(s1_flux=1.0, coupling=1.0, shot_psd=1.0, squeezing_db=db, transmission=eta)
        assert xi2_from_db(db) - 1e-12 <= probe.xi2 <= 1.0 + 1e-12
        assert probe.anti_squeezing * probe.xi2 == pytest.approx(1.0)


class TestSimPlan:
    def test_default_step(self):
        plan = SimPlan()
        assert plan.resolved_dt(2.0e3) == pytest.approx(1.0 / 400.0e3)
        assert plan.stride(plan.validate_for(2.0e3)) == 25
        assert plan.samples_per_record == 8000

    def test_step_too_coarse(self):
        plan = SimPlan(dt=1e-4)
        with pytest.raises(InvalidPlanError, match="exceeds"):
            plan.validate_for(2.0e3)

    def test_step_must_divide_sample_period(self):
        plan = SimPlan(dt=0.7e-6)
        with pytest.raises(InvalidPlanError, match="divide"):
            plan.validate_for(2.0e3)

    def test_sample_rate_below_four_fmod(self):
        with pytest.raises(InvalidPlanError):
            SimPlan(sample_rate=4000.0).validate_for(2.0e3)

    @pytest.mark.parametrize("kwargs", [
        {"record_seconds": 0.0},
        {"n_records": 0},
        {"warmup_factor": 2.0},
        {"record_seconds": 1.0 / 3.0},
        {"seed": -1},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidPlanError):
            SimPlan(**kwargs)


class TestSpectrum:
    def make(self, n=10, record_seconds=0.5):
        freqs = np.arange(n) / record_seconds
        return Spectrum(freqs, np.linspace(1.0, 2.0, n), record_seconds, n_averages=4,
                        psd_stderr=np.full(n, 0.1))

    def test_band(self):
        band = self.make().band(4.0, 10.0)
        np.testing.assert_allclose(band.freqs, [4.0, 6.0, 8.0, 10.0])
        assert band.n_averages == 4

    def test_mean_near(self):
        value, err = self.make().mean_near(6.0, 2.0)
        assert value == pytest.approx(np.mean(np.linspace(1.0, 2.0, 10)[2:5]))
        assert err == pytest.approx(0.1 / math.sqrt(3))

    def test_non_uniform_axis(self):
        with pytest.raises(InvalidInputError, match="uniform"):
            Spectrum(np.array([0.0, 2.0, 5.0]), np.ones(3), 0.5)

    def test_negative_psd(self):
        with pytest.raises(InvalidInputError):
            Spectrum(np.array([0.0, 2.0]), np.array([1.0, -1.0]), 0.5)


def test_quantity_to_dict():
    assert Quantity(1.5, 0.25).to_dict() == {"value": 1.5, "stderr": 0.25}


class TestSettings:
    def test_desk_profile(self, desk_config):
        values = profile_options["desk"]
        s_sigma = spin_noise_psd(values)
        assert s_sigma == pytest.approx(2496.55, rel=1e-4)
        assert desk_config.probe.shot_psd == pytest.approx(s_sigma / (2.0 * REFERENCE_ZETA2))
        assert desk_config.pump.f_mod == pytest.approx(2.0e3)
        assert desk_config.field.b0 == pytest.approx(resonant_field(desk_config.ensemble, TWO_PI * 2.0e3))
        assert desk_config.ensemble.gamma_rel + desk_config.pump.p0 * desk_config.pump.duty == \
            pytest.approx(TWO_PI * 170.0)

    def test_lab_profile(self):
        config = load_config(profile="lab")
        assert config.field.b0 == 4.3e-6
        assert config.pump.f_mod == pytest.approx(30.164e3)

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 11, "n_records": 7, "squeezing_db": 1.0}))
        config = load_config(path, overrides={"seed": 12, "n_records": None})
        assert config.plan.seed == 12
        assert config.plan.n_records == 7
        assert config.probe.squeezing_db == 1.0

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seeds": 3}))
        with pytest.raises(ConfigError, match="seeds"):
            load_config(path)

    def test_nested_value(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": [1, 2]}))
        with pytest.raises(ConfigError, match="scalars"):
            load_config(path)

    def test_missing_and_malformed_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{seed: 1")
        with pytest.raises(ConfigError, match="valid JSON"):
            load_config(bad)

    def test_unknown_profile(self):
        with pytest.raises(ConfigError, match="nonexistent"):
            load_config(profile="nonexistent")

    def test_paper_profile_alias(self):
        paper = load_config(profile="paper")
        lab = load_config(profile="lab")
        assert paper.field.b0 == lab.field.b0
        assert paper.pump.f_mod == lab.pump.f_mod
        assert paper.profile == "lab"

    def test_invalid_values_become_config_errors(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"duty": 1.5})

    def test_flat_dict_round_trips_keys(self, desk_config):
        flat = desk_config.to_flat_dict()
        assert set(flat) - {"profile"} <= set(profile_options["desk"])
        assert flat["seed"] == desk_config.plan.seed

    def test_pump_program_defaults(self):
        prog = PumpProgram(p0=100.0)
        assert prog.period == pytest.approx(1.0 / 2.0e3)
