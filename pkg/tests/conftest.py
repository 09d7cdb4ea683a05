import pytest

from windtc.grid_data import generate_instance, load_bundled


@pytest.fixture(scope="session")
def six_bus():
    return load_bundled("six_bus")


@pytest.fixture(scope="session")
def congested():
    return load_bundled("six_bus_congested")


@pytest.fixture(scope="session")
def three_bus():
    return load_bundled("three_bus")


@pytest.fixture(scope="session")
def small_instances():
    """Five random 3-bus, 2-block instances."""
    return [generate_instance(seed, "3bus") for seed in range(5)]
