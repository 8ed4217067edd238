import pytest

from src.model.throughput import link_rates
from src.model.types import AccessPolicy, Constraints, LinkRates, SystemParams


@pytest.fixture
def params() -> SystemParams:
    """Reference operating point with three secondary users."""
    return SystemParams()


@pytest.fixture
def rates(params: SystemParams) -> LinkRates:
    return link_rates(params)


@pytest.fixture
def constraints() -> Constraints:
    return Constraints()


@pytest.fixture
def policy() -> AccessPolicy:
    """Interior policy at the reference powers."""
    return AccessPolicy(a1=0.8, a2=0.3, gamma1=2e-10, gamma2=1e-10)
