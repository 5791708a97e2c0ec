import pytest

from tiersim import energy
from tiersim.trace import TraceSpec


@pytest.fixture(scope="session")
def paper_params() -> energy.EnergyParams:
    return energy.calibrate(energy.REFERENCE_TARGETS)


@pytest.fixture
def small_spec() -> TraceSpec:
    return TraceSpec(duration_min=1.0, activity_fraction=0.1, fall_count=2)
