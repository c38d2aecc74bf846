import math
from dataclasses import replace

import numpy as np
import pytest

from analysis.analytic import steady_state
from analysis.dsp import periodogram
from config.model import (
    EnsembleConfig,
    FieldProgram,
    IntegrationDivergedError,
    InvalidInputError,
    InvalidPlanError,
    ProbeConfig,
    PumpProgram,
    SimPlan,
    SpinInputs,
)
from generators.data_generator import SyntheticRecordGenerator
from generators.pump import cycle_mean, harmonic_amplitude
from generators.spin_generator import (
    SpinState,
    diffusion_strength,
    drift,
    integrate_lanes,
    simulate_lanes,
    simulate_record,
    step,
    warmup_steps,
)
from tests.oracles import OracleResult, ou_statistics


def ou_inputs(gamma_prime, probe):
    """B = 0 and constant pumping: every axis is an independent OU process."""
    ensemble = EnsembleConfig(atom_count=1.0e6, spin_f=1.0, gamma_rel=0.5 * gamma_prime)
    pump = PumpProgram(p0=0.5 * gamma_prime, duty=1.0, omega_mod=2.0 * math.pi)
    return SpinInputs(ensemble, FieldProgram(b0=0.0), pump, probe)


def precession_inputs(silent_probe):
    ensemble = EnsembleConfig(gamma_rel=0.0)
    return SpinInputs(ensemble, FieldProgram(b0=1e-7), PumpProgram(p0=0.0), silent_probe)


def test_diffusion_strength():
    cfg = EnsembleConfig(atom_count=3.0e5, spin_f=2.0, gamma_rel=40.0)
    assert diffusion_strength(cfg, 60.0) == pytest.approx(2.0 * 3.0e5 * 2.0 * 100.0)
    with pytest.raises(InvalidInputError):
        diffusion_strength(cfg, -1.0)


def test_drift_precesses_about_x(silent_probe):
    inputs = precession_inputs(silent_probe)
    cfg = inputs.ensemble
    state = SpinState([0.0, 0.0, 2.0])
    d = drift(state, cfg, inputs.field, inputs.pump, inputs.probe)
    np.testing.assert_allclose(d, [0.0, cfg.gamma * 1e-7 * 2.0, 0.0])


def test_drift_relaxes_and_pumps(silent_probe):
    cfg = EnsembleConfig(atom_count=10.0, spin_f=1.0, gamma_rel=5.0)
    pump = PumpProgram(p0=3.0, duty=1.0)
    state = SpinState([1.0, 0.0, 4.0])
    d = drift(state, cfg, FieldProgram(b0=0.0), pump, silent_probe)
    np.testing.assert_allclose(d, [-8.0, 0.0, -5.0 * 4.0 + 3.0 * (10.0 - 4.0)])


def test_state_must_be_finite():
    with pytest.raises(InvalidInputError):
        SpinState([np.nan, 0.0, 0.0])


def test_noise_free_precession_keeps_length(silent_probe):
    inputs = precession_inputs(silent_probe)
    state = SpinState([0.0, 3.0e5, 4.0e5])
    dt = 1e-6
    for _ in range(2000):
        state = step(state, inputs, dt)
    assert np.linalg.norm(state.f_vec) == pytest.approx(5.0e5, rel=1e-12)
    assert state.step_index == 2000
    # Exact rotation: the phase advanced by |gamma| B t.
    angle = math.atan2(state.f_vec[2], state.f_vec[1]) - math.atan2(4.0, 3.0)
    expected = -inputs.ensemble.gamma * 1e-7 * 2000 * dt
    assert math.remainder(angle - expected, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)


def test_step_matches_lane_integration(desk_config):
    inputs = desk_config.inputs
    dt = desk_config.plan.resolved_dt(inputs.pump.f_mod)
    start = np.array([1.0e5, -2.0e4, 3.0e5])
    plan = SimPlan(record_seconds=0.05, n_records=1, spin_noise=False, backaction=False)
    _, samples = integrate_lanes(inputs, [inputs.field], plan, dt, 60, 1, 0, [0], initial=start)

    state = SpinState(start)
    expected = [state.f_vec]
    for _ in range(59):
        state = step(state, inputs, dt, spin_noise=False, backaction=False)
        expected.append(state.f_vec)
    np.testing.assert_allclose(samples[0], np.array(expected), rtol=1e-10, atol=1e-6)


def test_divergence_reports_step():
    inputs = ou_inputs(100.0, ProbeConfig(s1_flux=1.0, coupling=0.0, shot_psd=0.0))
    plan = SimPlan(record_seconds=0.5, n_records=1, sample_rate=1000.0)
    with pytest.raises(IntegrationDivergedError) as err:
        integrate_lanes(inputs, [inputs.field], plan, 1e-3, 2, 1, 0, [0], initial=[np.nan, 0.0, 0.0])
    assert err.value.step_index == 0


def test_warmup_needs_relaxation(silent_probe):
    inputs = precession_inputs(silent_probe)
    with pytest.raises(InvalidPlanError):
        warmup_steps(SimPlan(), inputs, 1e-6)


def test_records_are_reproducible(desk_config, small_plan):
    a = simulate_record(small_plan, desk_config.inputs, record_index=2)
    b = simulate_record(small_plan, desk_config.inputs, record_index=2)
    c = simulate_record(small_plan, desk_config.inputs, record_index=1)
    np.testing.assert_array_equal(a.f_samples, b.f_samples)
    assert not np.array_equal(a.f_samples, c.f_samples)
    assert len(a) == small_plan.samples_per_record
    assert a.times[1] == pytest.approx(1.0 / small_plan.sample_rate)


def test_lane_matches_single_record(desk_config, small_plan):
    lanes = simulate_lanes(small_plan, desk_config.inputs, [0, 1, 2])
    single = simulate_record(small_plan, desk_config.inputs, record_index=1)
    np.testing.assert_allclose(lanes[1].f_samples, single.f_samples, rtol=1e-12, atol=1e-6)


def test_no_coupling_ignores_s3_noise(desk_config, small_plan):
    inputs = desk_config.inputs
    probe = ProbeConfig(s1_flux=inputs.probe.s1_flux, coupling=0.0, shot_psd=inputs.probe.shot_psd)
    loud = ProbeConfig(s1_flux=probe.s1_flux, coupling=0.0, shot_psd=probe.shot_psd, s3_psd=100.0 * probe.shot_psd)
    quiet_run = simulate_record(small_plan, inputs.with_probe(probe))
    loud_run = simulate_record(small_plan, inputs.with_probe(loud))
    np.testing.assert_array_equal(quiet_run.f_samples, loud_run.f_samples)


def test_steady_precession_amplitude(desk_config):
    plan = SimPlan(record_seconds=0.05, n_records=1, spin_noise=False, backaction=False)
    traj = simulate_record(plan, desk_config.inputs)
    cfg, pump = desk_config.ensemble, desk_config.pump
    delta = cfg.gamma_rel + pump.p0 * pump.duty
    expected = pump.p0 * math.sin(math.pi * pump.duty) / math.pi * cfg.f_max / delta
    amplitude = np.sqrt(np.mean(traj.fz**2 + traj.fy**2))
    assert amplitude == pytest.approx(expected, rel=0.03)


@pytest.mark.slow
def test_worker_count_does_not_change_records(desk_config, small_plan):
    serial = SyntheticRecordGenerator(workers=1).generate_trajectories(small_plan, desk_config.inputs)
    parallel = SyntheticRecordGenerator(workers=2).generate_trajectories(small_plan, desk_config.inputs)
    assert [t.record_index for t in parallel] == [0, 1, 2]
    for a, b in zip(serial, parallel):
        np.testing.assert_allclose(a.f_samples, b.f_samples, rtol=1e-12, atol=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("gamma_prime", [100.0, 300.0, 1000.0])
def test_fluctuation_dissipation_closure(gamma_prime, silent_probe):
    inputs = ou_inputs(gamma_prime, silent_probe)
    sample_rate = 5.0 * gamma_prime
    plan = SimPlan(record_seconds=1000.0 / gamma_prime, n_records=400, sample_rate=sample_rate,
                   seed=int(gamma_prime), backaction=False)
    trajectories = simulate_lanes(plan, inputs)
    expected = ou_statistics(gamma_prime, diffusion_strength(inputs.ensemble, inputs.pump.p0))["variance"]
    assert expected == pytest.approx(inputs.ensemble.equilibrium_variance)
    for axis in (0, 1):
        values = np.concatenate([t.f_samples[:, axis] for t in trajectories])
        result = OracleResult.compare(f"var axis {axis}", np.mean(values**2), expected, 0.01)
        assert result.passed, result


def rotating_amplitude(traj):
    """|F_plus|: the lab-frame record mixed down at the pump frequency, whole periods only."""
    omega = traj.inputs.pump.omega_mod
    return abs(np.mean((traj.fz + 1j * traj.fy) * np.exp(1j * omega * traj.times)))


def test_noise_free_decay(silent_probe):
    gamma = 100.0
    ensemble = EnsembleConfig(gamma_rel=gamma)
    inputs = SpinInputs(ensemble, FieldProgram(b0=0.0), PumpProgram(p0=0.0), silent_probe)
    dt = 1e-4 / gamma
    start = np.array([2.0e5, -1.0e5, 3.0e5])
    state = SpinState(start)
    for _ in range(50000):
        state = step(state, inputs, dt, spin_noise=False, backaction=False)
    assert state.t == pytest.approx(5.0 / gamma, rel=1e-9)
    expected = np.linalg.norm(start) * math.exp(-5.0)
    assert np.linalg.norm(state.f_vec) == pytest.approx(expected, rel=1e-6)


def test_detuned_pump_amplitude(desk_config):
    inputs = desk_config.inputs
    cfg, pump = inputs.ensemble, inputs.pump
    delta = cfg.gamma_rel + cycle_mean(pump)
    on_resonance = FieldProgram(b0=pump.omega_mod / abs(cfg.gamma))
    detuned = FieldProgram(b0=(pump.omega_mod + delta) / abs(cfg.gamma))
    plan = SimPlan(record_seconds=0.05, n_records=2, spin_noise=False, backaction=False)
    resonant, shifted = simulate_lanes(plan, inputs, [0, 1], [on_resonance, detuned])
    # Pump harmonics beyond the rotating-wave term shift the amplitude by a few percent.
    assert rotating_amplitude(resonant) == pytest.approx(abs(steady_state(cfg, pump, 0.0)), rel=0.04)
    ratio = rotating_amplitude(shifted) / rotating_amplitude(resonant)
    assert ratio == pytest.approx(1.0 / math.sqrt(2.0), rel=0.03)


@pytest.mark.parametrize("pump_factor", [0.25, 1.0, 4.0])
def test_polarization_never_exceeds_saturation(desk_config, pump_factor):
    inputs = desk_config.inputs
    pump = replace(inputs.pump, p0=pump_factor * inputs.pump.p0)
    driven = inputs.with_pump(pump)
    plan = SimPlan(record_seconds=0.05, n_records=1, spin_noise=False, backaction=False)
    traj = simulate_record(plan, driven)
    bound = driven.ensemble.f_max * abs(harmonic_amplitude(pump)) / cycle_mean(pump)
    amplitude = rotating_amplitude(traj)
    assert amplitude <= 1.01 * bound


@pytest.mark.slow
def test_autocorrelation_decays_at_relaxation_rate(silent_probe):
    gamma_prime = 200.0
    ensemble = EnsembleConfig(atom_count=1.0e6, spin_f=1.0, gamma_rel=gamma_prime)
    pump = PumpProgram(p0=0.0, duty=1.0, omega_mod=2.0 * math.pi)
    inputs = SpinInputs(ensemble, FieldProgram(b0=0.0), pump, silent_probe)
    sample_rate = 5.0 * gamma_prime
    plan = SimPlan(record_seconds=1000.0 / gamma_prime, n_records=200, sample_rate=sample_rate,
                   seed=21, backaction=False)
    trajectories = simulate_lanes(plan, inputs)
    lags = np.arange(1, 6)
    for axis in range(3):
        series = [t.f_samples[:, axis] for t in trajectories]
        power = np.mean([np.mean(x**2) for x in series])
        rho = np.array([np.mean([np.mean(x[:-k] * x[k:]) for x in series]) / power for k in lags])
        rate = -np.polyfit(lags / sample_rate, np.log(rho), 1)[0]
        assert rate == pytest.approx(gamma_prime, rel=0.03)


@pytest.mark.slow
def test_halving_dt_keeps_spectra(desk_config):
    config = desk_config.with_plan(n_records=40)
    dt = config.plan.resolved_dt(config.pump.f_mod)
    generator = SyntheticRecordGenerator()
    runs = []
    for plan in (config.plan, replace(config.plan, dt=0.5 * dt, seed=config.plan.seed + 1)):
        records, _ = generator.generate_demodulated(plan, config.inputs, config.demod)
        runs.append(records)
    fs = runs[0][0].sample_rate
    for quadrature in ("u", "v"):
        for low, high in ((10.0, 85.0), (300.0, 850.0)):
            means = []
            for records in runs:
                freqs, psd = periodogram([getattr(r, quadrature) for r in records], fs)
                mask = (freqs >= low) & (freqs <= high)
                per_record = psd[:, mask].mean(axis=1)
                means.append((per_record.mean(), per_record.std(ddof=1) / math.sqrt(per_record.size)))
            (a, sa), (b, sb) = means
            assert abs(a - b) <= 4.0 * math.hypot(sa, sb), (quadrature, low, high)
