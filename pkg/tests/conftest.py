import pytest

from config.model import ProbeConfig, SimPlan
from config.settings import load_config


@pytest.fixture
def desk_config():
    return load_config()


@pytest.fixture
def quick_config(desk_config):
    """Desk physics with a small batch of records."""
    return desk_config.with_plan(n_records=4)


@pytest.fixture
def silent_probe():
    return ProbeConfig(s1_flux=1.0, coupling=0.0, shot_psd=0.0)


@pytest.fixture
def small_plan():
    return SimPlan(record_seconds=0.05, n_records=3, seed=7)
