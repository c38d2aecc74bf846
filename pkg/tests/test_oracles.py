import numpy as np
import pytest
from scipy import fft

from tests.oracles import OracleResult, first_order_solve, naive_dft, ou_statistics


def test_dft_of_delta_is_flat():
    x = np.zeros(32)
    x[0] = 1.0
    np.testing.assert_allclose(naive_dft(x), np.ones(32), atol=1e-12)


def test_dft_of_constant_is_dc_only():
    spectrum = naive_dft(np.full(16, 2.0))
    assert spectrum[0] == pytest.approx(32.0)
    np.testing.assert_allclose(spectrum[1:], 0.0, atol=1e-12)


def test_fast_transform_matches_direct_sum():
    x = np.random.default_rng(4).standard_normal(256)
    direct = naive_dft(x)
    fast = fft.fft(x)
    assert np.max(np.abs(fast - direct)) <= 1e-9 * np.max(np.abs(direct))
    np.testing.assert_allclose(fft.rfft(x), direct[:129], rtol=1e-9, atol=1e-9)


def test_dft_length_limit():
    with pytest.raises(ValueError):
        naive_dft(np.zeros(4097))


def test_ou_statistics():
    stats = ou_statistics(1.0, 2.0)
    assert stats["variance"] == 1.0
    atoms, spin = 1.0e6, 1.0
    closure = ou_statistics(300.0, 2.0 * 300.0 * atoms * spin * (spin + 1) / 3.0)
    assert closure["variance"] == pytest.approx(atoms * spin * (spin + 1) / 3.0)
    assert ou_statistics(2.0, 4.0, horizon=0.5)["autocovariance"] == pytest.approx(np.exp(-1.0))
    with pytest.raises(ValueError):
        ou_statistics(0.0, 1.0)


def test_first_order_solve_resonant_form():
    delta, omega = 1068.0, 3000.0
    x0, x1 = first_order_solve(delta, 0.0, omega, (0.0, 2.5))
    assert x0 == 0
    assert x1 == pytest.approx(2.5 / (delta - 1j * omega), rel=1e-12)


def test_first_order_solve_satisfies_system():
    delta, detuning, omega = 500.0, -220.0, 810.0
    drive = (1.5, -0.25)
    x0, x1 = first_order_solve(delta, detuning, omega, drive)
    a = delta - 1j * omega
    assert a * x0 - detuning * x1 == pytest.approx(drive[0], abs=1e-12)
    assert detuning * x0 + a * x1 == pytest.approx(drive[1], abs=1e-12)


def test_oracle_result():
    result = OracleResult.compare("unit", 1.001, 1.0, 0.01)
    assert result.passed
    assert not OracleResult.compare("unit", 1.1, 1.0, 0.01).passed
